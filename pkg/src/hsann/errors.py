"""Exception hierarchy. Every error carries a short machine-readable ``tag``."""


class HSANNError(Exception):
    tag = "error"


class InvalidDimension(HSANNError, ValueError):
    tag = "invalid-dimension"


class AliasingRiskError(HSANNError, ValueError):
    tag = "aliasing-risk"


class ShapeError(HSANNError, ValueError):
    tag = "shape"


class GeometryBreakdown(HSANNError):
    tag = "geometry-breakdown"


class OutOfChart(HSANNError):
    tag = "out-of-chart"


class InvalidAnnulus(HSANNError):
    tag = "invalid-annulus"


class ConditioningError(HSANNError):
    tag = "conditioning"


class OutsideAnnulus(HSANNError):
    tag = "outside-annulus"


class InnerSolveFailed(HSANNError):
    tag = "inner-solve-failed"


class StiffnessError(HSANNError):
    tag = "stiffness"


class InsufficientDecay(HSANNError):
    tag = "insufficient-decay"


class ShootingFailed(HSANNError):
    tag = "shooting-failed"


class UnstableTimeStep(HSANNError, ValueError):
    tag = "unstable-dt"


class ConfigError(HSANNError, ValueError):
    tag = "config"


class CheckpointError(HSANNError, ValueError):
    tag = "checkpoint"
