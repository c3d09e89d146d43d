"""Exception taxonomy shared across the package.

Validation errors (bad geometry, bad state) are raised before any work
happens; backend errors surface mid-command and are recorded in session
history by the engine.
"""

from __future__ import annotations


class VisloopError(Exception):
    """Base class for all package errors."""

    code = "error"


class InvalidGeometry(VisloopError):
    code = "invalid_geometry"


class EmptyInstruction(VisloopError):
    code = "empty_instruction"


class ConceptBoxMismatch(VisloopError):
    code = "concept_box_mismatch"


class MalformedRle(VisloopError):
    code = "malformed_rle"


class EmptyMask(VisloopError):
    code = "empty_mask"


class HoleCoversEverything(VisloopError):
    code = "hole_covers_everything"


class NoImage(VisloopError):
    code = "no_image"


class UnknownMask(VisloopError):
    code = "unknown_mask"


class NothingToUndo(VisloopError):
    code = "nothing_to_undo"


class InvalidCommand(VisloopError):
    code = "invalid_command"


class BackendError(VisloopError):
    """Raised when a capability call fails; the engine records a failed entry."""

    code = "backend_error"


class BackendUnavailable(BackendError):
    code = "backend_unavailable"


class BackendTimeout(BackendError):
    code = "backend_timeout"


class ProtocolError(BackendError):
    code = "protocol_error"


class NoObjectFound(BackendError):
    code = "no_object_found"


class FillUnavailable(BackendError):
    code = "fill_unavailable"
