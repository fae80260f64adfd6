"""Exception types shared across the workbench."""


class WorkbenchError(Exception):
    """Base class for all domain errors raised by this package."""

    code = "error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.__class__.__name__)
        self.detail = detail


class ShapeMismatch(WorkbenchError):
    code = "shape_mismatch"


class OutOfBounds(WorkbenchError):
    code = "out_of_bounds"


class EmptyInput(WorkbenchError):
    code = "empty_input"


class InvalidParam(WorkbenchError):
    code = "invalid_param"


class EmptyGroundTruth(WorkbenchError):
    code = "empty_ground_truth"


class EmptyPrompt(WorkbenchError):
    code = "empty_prompt"


class EmptyMask(WorkbenchError):
    code = "empty_mask"


class InsufficientPoints(WorkbenchError):
    code = "insufficient_points"


class NoFixations(WorkbenchError):
    code = "no_fixations"


class InvalidWindow(WorkbenchError):
    code = "invalid_window"


class OverlapError(WorkbenchError):
    code = "overlap"


class BackendUnavailable(WorkbenchError):
    code = "backend_unavailable"


class ProtocolError(WorkbenchError):
    code = "protocol_error"


class CorruptLog(WorkbenchError):
    code = "corrupt_log"


class CorpusError(WorkbenchError):
    code = "corpus_error"


class BadMagic(WorkbenchError):
    code = "bad_magic"


class BadHeader(WorkbenchError):
    code = "bad_header"


class UnsupportedDatatype(WorkbenchError):
    code = "unsupported_datatype"


class TruncatedData(WorkbenchError):
    code = "truncated_data"
