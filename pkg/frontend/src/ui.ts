// DOM wiring for the console: image panel, chat panel, and the three
// visual-interaction tabs. All geometry leaving this layer is normalized;
// the canvas element only ever displays bytes the service returned.

import { ApiClient, ApiError, CommandResponse, MaskView } from "./api.js";
import {
  addBox,
  addStroke,
  applyServerState,
  clearSketch,
  DEFAULT_BRUSH_RADIUS,
  generateCommand,
  generateValidation,
  initialState,
  inpaintCommand,
  inpaintValidation,
  latenciesFromEntry,
  segmentByStrokeCommand,
  segmentByTextCommand,
  selectTab,
  TabId,
  UiState,
} from "./state.js";
import { cornersToBox, dragIntent, NormPoint, toNormalized } from "./transform.js";

export class Console {
  private state: UiState = initialState();
  private image: HTMLImageElement | null = null;

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = TEMPLATE;
    this.state.sessionId = await this.api.createSession();
    this.bind();
    this.render();
  }

  private el<T extends HTMLElement>(selector: string): T {
    const found = this.root.querySelector(selector);
    if (!found) throw new Error(`missing element ${selector}`);
    return found as T;
  }

  private bind(): void {
    this.el<HTMLInputElement>("#file-input").addEventListener("change", (e) => {
      const input = e.target as HTMLInputElement;
      if (input.files && input.files[0]) void this.uploadFile(input.files[0]);
    });
    for (const tab of ["remove_change", "inpaint", "generate"] as TabId[]) {
      this.el(`#tab-${tab}`).addEventListener("click", () => {
        this.state = selectTab(this.state, tab);
        this.render();
      });
    }
    const overlay = this.el<HTMLCanvasElement>("#overlay");
    overlay.addEventListener("pointerdown", (e) => this.pointerDown(e));
    overlay.addEventListener("pointermove", (e) => this.pointerMove(e));
    overlay.addEventListener("pointerup", (e) => this.pointerUp(e));

    this.el("#btn-segment-stroke").addEventListener("click", () => {
      const draft = this.state.drafts.remove_change;
      if (draft.strokes.length === 0) return;
      void this.send(segmentByStrokeCommand(draft), () => {
        this.state = clearSketch(this.state, "remove_change");
      });
    });
    this.el("#btn-segment-text").addEventListener("click", () => {
      const text = this.el<HTMLInputElement>("#referring-text").value;
      if (!text.trim()) return;
      void this.send(segmentByTextCommand(text));
    });
    this.el("#btn-remove-generate").addEventListener("click", () => {
      void this.commitRemoveChange();
    });
    this.el("#btn-inpaint-generate").addEventListener("click", () => {
      void this.send(inpaintCommand(this.state.drafts.inpaint));
    });
    this.el("#btn-generate-new").addEventListener("click", () => {
      void this.send(generateCommand(this.state.drafts.generate));
    });
    this.el("#btn-clear-sketch").addEventListener("click", () => {
      this.state = clearSketch(this.state, this.state.activeTab);
      void this.send({ type: "clear_masks" });
    });
    this.el("#btn-undo").addEventListener("click", () => void this.undo());
    this.el<HTMLFormElement>("#chat-form").addEventListener("submit", (e) => {
      e.preventDefault();
      const input = this.el<HTMLInputElement>("#chat-input");
      const text = input.value.trim();
      if (!text) return;
      input.value = "";
      void this.send({ type: "chat", text });
    });

    for (const id of ["#referring-text", "#remove-grounding", "#inpaint-grounding",
                      "#generate-grounding", "#generate-caption"]) {
      this.el(id).addEventListener("input", () => this.syncDraftsFromInputs());
    }
  }

  private syncDraftsFromInputs(): void {
    const d = this.state.drafts;
    d.remove_change.referringText = this.el<HTMLInputElement>("#referring-text").value;
    d.remove_change.groundingText = this.el<HTMLInputElement>("#remove-grounding").value;
    d.inpaint.groundingText = this.el<HTMLInputElement>("#inpaint-grounding").value;
    d.generate.groundingText = this.el<HTMLInputElement>("#generate-grounding").value;
    d.generate.caption = this.el<HTMLInputElement>("#generate-caption").value;
    this.renderValidation();
  }

  // --- pointer handling ----------------------------------------------------

  private strokeInProgress: NormPoint[] | null = null;
  private boxAnchor: NormPoint | null = null;
  private dragAnchor: { x: number; y: number } | null = null;

  private overlayRect() {
    const overlay = this.el<HTMLCanvasElement>("#overlay");
    const r = overlay.getBoundingClientRect();
    return { left: r.left, top: r.top, width: r.width, height: r.height };
  }

  private pointerDown(e: PointerEvent): void {
    if (!this.state.canvasDims || this.state.busy) return;
    const p = toNormalized(e.clientX, e.clientY, this.overlayRect());
    if (this.state.activeTab === "remove_change") {
      const mask = this.selectedMask();
      if (mask && this.insideMaskBbox(p, mask)) {
        this.dragAnchor = { x: e.clientX, y: e.clientY };
      } else {
        this.strokeInProgress = [p];
      }
    } else {
      this.boxAnchor = p;
    }
    (e.target as HTMLCanvasElement).setPointerCapture(e.pointerId);
  }

  private pointerMove(e: PointerEvent): void {
    if (this.strokeInProgress) {
      this.strokeInProgress.push(toNormalized(e.clientX, e.clientY, this.overlayRect()));
      this.drawOverlay();
    } else if (this.dragAnchor && this.state.canvasDims) {
      const rect = this.overlayRect();
      const scaleX = this.state.canvasDims.width / rect.width;
      const scaleY = this.state.canvasDims.height / rect.height;
      this.state.dragOffsetPx = {
        dx: Math.round((e.clientX - this.dragAnchor.x) * scaleX),
        dy: Math.round((e.clientY - this.dragAnchor.y) * scaleY),
      };
      this.drawOverlay();
    } else if (this.boxAnchor) {
      this.drawOverlay(toNormalized(e.clientX, e.clientY, this.overlayRect()));
    }
  }

  private pointerUp(e: PointerEvent): void {
    if (this.strokeInProgress) {
      const points = this.strokeInProgress.map((p) => [p.x, p.y] as [number, number]);
      this.state = addStroke(this.state, { points, brushRadius: DEFAULT_BRUSH_RADIUS });
      this.strokeInProgress = null;
    } else if (this.boxAnchor) {
      const end = toNormalized(e.clientX, e.clientY, this.overlayRect());
      const box = cornersToBox(this.boxAnchor, end);
      if (box && this.state.activeTab !== "remove_change") {
        this.state = addBox(this.state, this.state.activeTab, box);
      }
      this.boxAnchor = null;
    }
    this.dragAnchor = null; // offset stays until Generate commits it
    this.render();
  }

  private selectedMask(): MaskView | null {
    return this.state.masks.find((m) => m.id === this.state.selectedMaskId) ?? null;
  }

  private insideMaskBbox(p: NormPoint, mask: MaskView): boolean {
    if (!this.state.canvasDims) return false;
    const { width, height } = this.state.canvasDims;
    const [x0, y0, x1, y1] = mask.bbox_px;
    const off = this.state.dragOffsetPx;
    const px = p.x * width;
    const py = p.y * height;
    return px >= x0 + off.dx && px < x1 + off.dx && py >= y0 + off.dy && py < y1 + off.dy;
  }

  // --- commands --------------------------------------------------------------

  private async uploadFile(file: File): Promise<void> {
    const b64 = await fileToB64(file);
    await this.withBusy(async () => {
      const summary = await this.api.uploadImage(this.state.sessionId!, b64);
      this.state.canvasDims =
        summary.width && summary.height
          ? { width: summary.width, height: summary.height }
          : null;
      const png = await this.api.canvasPng(this.state.sessionId!);
      this.state = applyServerState(this.state, {
        canvas: bytesToB64(png),
        canvas_hash: summary.canvas_hash,
        masks: summary.masks,
        transcript: summary.transcript,
      });
    });
  }

  private async commitRemoveChange(): Promise<void> {
    const mask = this.selectedMask();
    if (!mask || !this.state.canvasDims) return;
    const grounding = this.state.drafts.remove_change.groundingText.trim();
    if (grounding) {
      await this.send({ type: "replace_object", mask_id: mask.id, prompt: grounding });
      return;
    }
    const intent = dragIntent(mask.bbox_px, this.state.dragOffsetPx, this.state.canvasDims);
    if (intent.kind === "remove") {
      await this.send({ type: "remove_object", mask_id: mask.id });
    } else {
      await this.send({ type: "move_object", mask_id: mask.id, dx: intent.dx, dy: intent.dy });
    }
  }

  private async undo(): Promise<void> {
    await this.withBusy(async () => {
      const summary = await this.api.undo(this.state.sessionId!);
      const png = await this.api.canvasPng(this.state.sessionId!);
      this.state.canvasDims =
        summary.width && summary.height
          ? { width: summary.width, height: summary.height }
          : null;
      this.state = applyServerState(this.state, {
        canvas: bytesToB64(png),
        canvas_hash: summary.canvas_hash,
        masks: summary.masks,
        transcript: summary.transcript,
      });
    });
  }

  private async send(
    body: Record<string, unknown> & { type: string },
    onOk?: () => void,
  ): Promise<void> {
    await this.withBusy(async () => {
      const resp: CommandResponse = await this.api.command(this.state.sessionId!, body);
      if (resp.canvas) {
        const img = await b64Dims(resp.canvas);
        this.state.canvasDims = img;
      }
      this.state = applyServerState(this.state, {
        canvas: resp.canvas,
        canvas_hash: resp.canvas_hash,
        masks: resp.masks,
        transcript: resp.transcript,
        latencies: latenciesFromEntry(resp.entry),
      });
      onOk?.();
    });
  }

  private async withBusy(work: () => Promise<void>): Promise<void> {
    if (this.state.busy) return;
    this.state = { ...this.state, busy: true };
    this.render();
    try {
      await work();
    } catch (err) {
      this.state.error = err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err);
    } finally {
      this.state = { ...this.state, busy: false };
      this.render();
    }
  }

  // --- rendering ---------------------------------------------------------------

  private render(): void {
    for (const tab of ["remove_change", "inpaint", "generate"] as TabId[]) {
      this.el(`#tab-${tab}`).classList.toggle("active", this.state.activeTab === tab);
      this.el(`#panel-${tab}`).classList.toggle("hidden", this.state.activeTab !== tab);
    }
    this.root.querySelectorAll("button, input, textarea").forEach((node) => {
      (node as HTMLButtonElement).disabled = this.state.busy;
    });
    this.renderValidation();
    this.renderTranscript();
    this.renderMaskList();
    this.el("#error-line").textContent = this.state.error ?? "";
    this.el("#canvas-hash").textContent = this.state.canvasHash
      ? `canvas ${this.state.canvasHash}`
      : "no image yet";
    void this.redrawCanvas();
  }

  private renderValidation(): void {
    const inpaint = inpaintValidation(this.state.drafts.inpaint);
    this.el<HTMLButtonElement>("#btn-inpaint-generate").disabled =
      this.state.busy || !inpaint.ok;
    this.el("#inpaint-validation").textContent = inpaint.message ?? "";
    const gen = generateValidation(this.state.drafts.generate);
    this.el<HTMLButtonElement>("#btn-generate-new").disabled = this.state.busy || !gen.ok;
    this.el("#generate-validation").textContent = gen.message ?? "";
  }

  private renderTranscript(): void {
    const log = this.el("#chat-log");
    log.innerHTML = "";
    for (const [role, text] of this.state.transcript) {
      const div = document.createElement("div");
      div.className = `turn ${role}`;
      div.textContent = `${role}: ${text}`;
      log.appendChild(div);
    }
    const latency = this.state.lastLatencies
      .map((c) => `${c.capability} ${(c.duration_s * 1000).toFixed(0)}ms`)
      .join(", ");
    this.el("#latency-line").textContent = latency ? `last turn: ${latency}` : "";
    log.scrollTop = log.scrollHeight;
  }

  private renderMaskList(): void {
    const list = this.el("#mask-list");
    list.innerHTML = "";
    for (const mask of this.state.masks) {
      const item = document.createElement("button");
      item.className = "mask-chip" + (mask.id === this.state.selectedMaskId ? " selected" : "");
      item.textContent = `${mask.id}${mask.label ? ` (${mask.label})` : ""}`;
      item.addEventListener("click", () => {
        this.state.selectedMaskId = mask.id;
        this.state.dragOffsetPx = { dx: 0, dy: 0 };
        this.render();
      });
      list.appendChild(item);
    }
  }

  private async redrawCanvas(): Promise<void> {
    const canvas = this.el<HTMLCanvasElement>("#image-canvas");
    const overlay = this.el<HTMLCanvasElement>("#overlay");
    if (!this.state.canvasB64) {
      canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
      return;
    }
    if (!this.image || this.image.dataset.b64 !== this.state.canvasB64) {
      this.image = await loadImage(this.state.canvasB64);
      this.image.dataset.b64 = this.state.canvasB64;
    }
    const img = this.image;
    canvas.width = overlay.width = img.naturalWidth;
    canvas.height = overlay.height = img.naturalHeight;
    // display scaling only; pixel content is exactly the service's PNG
    canvas.getContext("2d")!.drawImage(img, 0, 0);
    this.drawOverlay();
  }

  private drawOverlay(liveCorner?: NormPoint): void {
    const overlay = this.el<HTMLCanvasElement>("#overlay");
    const ctx = overlay.getContext("2d");
    if (!ctx || !this.state.canvasDims) return;
    const { width, height } = this.state.canvasDims;
    ctx.clearRect(0, 0, overlay.width, overlay.height);

    const mask = this.selectedMask();
    if (mask && this.state.activeTab === "remove_change") {
      ctx.fillStyle = "rgba(255, 0, 255, 0.45)";
      drawRle(ctx, mask.rle, this.state.dragOffsetPx);
    }

    ctx.strokeStyle = "magenta";
    ctx.lineWidth = Math.max(1, 0.004 * Math.max(width, height) * 2);
    ctx.lineCap = "round";
    if (this.state.activeTab === "remove_change") {
      const strokes = [...this.state.drafts.remove_change.strokes.map((s) => s.points)];
      if (this.strokeInProgress) strokes.push(this.strokeInProgress.map((p) => [p.x, p.y]));
      for (const points of strokes) {
        ctx.beginPath();
        points.forEach(([x, y], i) => {
          if (i === 0) ctx.moveTo(x * width, y * height);
          else ctx.lineTo(x * width, y * height);
        });
        ctx.stroke();
      }
    } else {
      const draft =
        this.state.activeTab === "inpaint"
          ? this.state.drafts.inpaint
          : this.state.drafts.generate;
      ctx.lineWidth = 2;
      for (const b of draft.boxes) {
        ctx.strokeRect(b.x0 * width, b.y0 * height, (b.x1 - b.x0) * width, (b.y1 - b.y0) * height);
      }
      if (this.boxAnchor && liveCorner) {
        const live = cornersToBox(this.boxAnchor, liveCorner);
        if (live) {
          ctx.setLineDash([4, 3]);
          ctx.strokeRect(
            live.x0 * width, live.y0 * height,
            (live.x1 - live.x0) * width, (live.y1 - live.y0) * height,
          );
          ctx.setLineDash([]);
        }
      }
    }
  }
}

function drawRle(
  ctx: CanvasRenderingContext2D,
  rle: { w: number; h: number; counts: number[] },
  offset: { dx: number; dy: number },
): void {
  let pos = 0;
  let foreground = false;
  for (const run of rle.counts) {
    if (foreground) {
      for (let i = pos; i < pos + run; i++) {
        const y = Math.floor(i / rle.w);
        const xStart = i % rle.w;
        const runEnd = Math.min(pos + run, (y + 1) * rle.w);
        ctx.fillRect(xStart + offset.dx, y + offset.dy, runEnd - i, 1);
        i = runEnd - 1;
      }
    }
    pos += run;
    foreground = !foreground;
  }
}

function fileToB64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const url = reader.result as string;
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}

function bytesToB64(bytes: Uint8Array): string {
  let binary = "";
  for (const b of bytes) binary += String.fromCharCode(b);
  return btoa(binary);
}

function loadImage(b64: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = reject;
    img.src = `data:image/png;base64,${b64}`;
  });
}

async function b64Dims(b64: string): Promise<{ width: number; height: number }> {
  const img = await loadImage(b64);
  return { width: img.naturalWidth, height: img.naturalHeight };
}

const TEMPLATE = `
<header>
  <h1>visloop console</h1>
  <span id="canvas-hash" class="hash"></span>
  <span id="error-line" class="error"></span>
</header>
<main>
  <section class="left">
    <div class="image-panel">
      <div class="canvas-stack">
        <canvas id="image-canvas"></canvas>
        <canvas id="overlay"></canvas>
      </div>
      <div class="image-controls">
        <input type="file" id="file-input" accept="image/*" />
        <div id="mask-list"></div>
      </div>
    </div>
    <nav class="tabs">
      <button id="tab-remove_change">Remove or Change Objects</button>
      <button id="tab-inpaint">Inpaint New Objects</button>
      <button id="tab-generate">Generate New Image</button>
    </nav>
    <div id="panel-remove_change" class="tab-panel">
      <p>Draw a stroke on the object, then Segment. Drag the mask out of the
      image and Generate to remove it; drag partway to move it.</p>
      <button id="btn-segment-stroke">Segment</button>
      <label>Enter referring text
        <input id="referring-text" type="text" placeholder="dock" /></label>
      <button id="btn-segment-text">Segment by text</button>
      <label>Enter grounding text for generating a new image
        <input id="remove-grounding" type="text" placeholder="sunset scene" /></label>
      <button id="btn-remove-generate">Generate</button>
    </div>
    <div id="panel-inpaint" class="tab-panel hidden">
      <p>Draw boxes, then list one concept per box separated by semicolons.</p>
      <label>Grounding instruction
        <input id="inpaint-grounding" type="text" placeholder="blue hat; sun glasses" /></label>
      <span id="inpaint-validation" class="error"></span>
      <button id="btn-inpaint-generate">Generate</button>
    </div>
    <div id="panel-generate" class="tab-panel hidden">
      <p>Sketch the layout with boxes and describe the image.</p>
      <label>Language instruction
        <input id="generate-caption" type="text"
               placeholder="a boat on a lake, with mountains in the background" /></label>
      <label>Grounding instruction
        <input id="generate-grounding" type="text" placeholder="boat; lake; mountains" /></label>
      <span id="generate-validation" class="error"></span>
      <button id="btn-generate-new">Generate</button>
    </div>
    <button id="btn-clear-sketch">Clear sketch + accept</button>
  </section>
  <section class="right">
    <div id="chat-log"></div>
    <div id="latency-line" class="latency"></div>
    <form id="chat-form">
      <input id="chat-input" type="text" placeholder="Ask about the image..." />
      <button type="submit">Send</button>
    </form>
    <button id="btn-undo">Undo last edit</button>
  </section>
</main>
`;
