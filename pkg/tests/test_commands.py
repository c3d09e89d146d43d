from __future__ import annotations

import pytest

from visloop import commands as cmd
from visloop.commands import command_from_json, command_summary, command_to_json
from visloop.errors import InvalidCommand
from visloop.geometry import BoundingBox, GroundingSpec, Point, ReferringText, Stroke
from visloop.image import CanvasImage


def roundtrip(command):
    return command_from_json(command_to_json(command))


class TestJsonRoundtrip:
    def test_all_variants(self):
        img = CanvasImage.solid(4, 4, (9, 9, 9, 255))
        spec = GroundingSpec(("a", "b"), (BoundingBox(0, 0, 0.5, 0.5), BoundingBox(0.5, 0.5, 1, 1)))
        variants = [
            cmd.SetImage(img),
            cmd.GenerateImage("caption", spec),
            cmd.GenerateImage("caption", None),
            cmd.Chat("hello"),
            cmd.SegmentByStroke((Stroke((Point(0.1, 0.2), Point(0.3, 0.4)), 0.01),)),
            cmd.SegmentByText(ReferringText("dock")),
            cmd.RemoveObject("m1"),
            cmd.MoveObject("m2", 0.25, -0.1),
            cmd.ReplaceObject("m3", "sunset scene"),
            cmd.InpaintObjects(spec),
            cmd.ClearMasks(),
            cmd.Undo(),
        ]
        for variant in variants:
            assert roundtrip(variant) == variant

    def test_unknown_type(self):
        with pytest.raises(InvalidCommand):
            command_from_json({"type": "teleport"})

    def test_missing_fields(self):
        with pytest.raises(InvalidCommand):
            command_from_json({"type": "chat"})
        with pytest.raises(InvalidCommand):
            command_from_json({"type": "move_object", "mask_id": "m1", "dx": 0.1})

    def test_not_an_object(self):
        with pytest.raises(InvalidCommand):
            command_from_json(["chat"])

    def test_empty_payload_rules(self):
        with pytest.raises(InvalidCommand):
            cmd.Chat("   ")
        with pytest.raises(InvalidCommand):
            cmd.GenerateImage("")
        with pytest.raises(InvalidCommand):
            cmd.ReplaceObject("m1", " ")
        with pytest.raises(InvalidCommand):
            cmd.SegmentByStroke(())
        with pytest.raises(InvalidCommand):
            command_from_json({"type": "inpaint_objects", "grounding": None})

    def test_bad_stroke_geometry(self):
        with pytest.raises(InvalidCommand):
            command_from_json(
                {"type": "segment_by_stroke", "strokes": [{"points": [[1.5, 0.0]]}]}
            )


class TestSummaries:
    def test_set_image_summarized_as_hash(self):
        img = CanvasImage.solid(4, 4, (9, 9, 9, 255))
        summary = command_summary(cmd.SetImage(img))
        assert summary == {"type": "set_image", "image_hash": img.content_hash}

    def test_stroke_summarized_as_count(self):
        strokes = (Stroke((Point(0.1, 0.2),)), Stroke((Point(0.3, 0.4),)))
        assert command_summary(cmd.SegmentByStroke(strokes)) == {
            "type": "segment_by_stroke",
            "strokes": 2,
        }

    def test_chat_carries_text(self):
        assert command_summary(cmd.Chat("hi")) == {"type": "chat", "text": "hi"}
