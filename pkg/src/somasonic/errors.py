"""Exception hierarchy shared across the package."""


class SomasonicError(Exception):
    """Base class for all package errors."""


class MeshError(SomasonicError):
    """Mesh loading or validation failure."""


class MeshFormatError(MeshError):
    """File could not be parsed as OBJ or binary STL."""


class WatertightError(MeshError):
    """Operation requires a closed (watertight) mesh."""


class DegenerateGeometryError(SomasonicError):
    """Input points are collinear/coplanar or otherwise degenerate."""


class UnknownTissueError(SomasonicError):
    """Tissue name not present in the registry."""


class ModalError(SomasonicError):
    """Assembly or eigensolution failure."""


class ProtocolError(SomasonicError):
    """Malformed or unsupported wire message."""


class TruncatedMessageError(ProtocolError):
    """Buffer ended before the message was complete."""


class SceneError(SomasonicError):
    """Scene configuration could not be resolved."""


class EvalError(SomasonicError):
    """Trial scoring or aggregation failure."""


class AnalysisError(SomasonicError):
    """Signal too short or silent for the requested analysis."""
