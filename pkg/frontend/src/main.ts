import { ApiClient } from "./api.js";
import { Console } from "./ui.js";

// Same-origin by default (the session service serves this bundle at "/");
// override with <meta name="visloop-base-url" content="http://host:port">.
function baseUrl(): string {
  const meta = document.querySelector('meta[name="visloop-base-url"]');
  return meta?.getAttribute("content") ?? "";
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
void new Console(new ApiClient(baseUrl()), root).start();
