"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class MbibError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MbibError):
    """Invalid configuration (bad option values, unknown preset, bad graph spec)."""


class DataError(MbibError):
    """Invalid or insufficient input data."""


class NumericError(MbibError):
    """A numerical routine failed (ill-conditioning, divergence, no convergence)."""


# graph / spec construction

class CycleDetected(ConfigError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle + [self.cycle[0]]))


class UnknownNode(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown node: {name!r}")


class UnknownPreset(ConfigError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown preset: {name!r}")


class WeightKeyMismatch(ConfigError):
    def __init__(self, node, expected, got):
        self.node = node
        super().__init__(
            f"weights for node {node!r} must be keyed by its parents "
            f"{sorted(expected)}, got {sorted(got)}"
        )


class InvalidMechanism(ConfigError):
    """Bad mechanism parameters (non-positive noise scale, bad family, bad df)."""


# data

class TooFewSamples(DataError):
    pass


class ConstantColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} is constant; cannot standardize")


class MissingColumn(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"column {name!r} not present in dataset")


class DegenerateTruth(DataError):
    """Truth vector has zero variance; R-squared is undefined."""


class NonFiniteData(DataError):
    """Dataset values must all be finite."""


# numerics

class NotSymmetric(NumericError):
    pass


class NoConvergence(NumericError):
    pass


class IllConditioned(NumericError):
    pass


class SingularSystem(NumericError):
    pass


class DimensionMismatch(NumericError):
    pass


class NotOrthonormal(NumericError):
    pass


class NonPositiveScale(NumericError):
    pass


class NonFiniteLoss(NumericError):
    """Training loss became non-finite; caller should reduce the learning rate."""


class Diverged(NumericError):
    """Training produced non-finite loss even after a learning-rate halving."""


class PreconditionViolated(ConfigError):
    """A theory check was invoked on an instance outside its hypotheses."""
