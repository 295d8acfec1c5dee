"""Exception types shared across the toolkit."""


class MolswapError(Exception):
    """Base class for all toolkit errors."""


class SmilesSyntaxError(MolswapError):
    """Input violates the SMILES subset grammar."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnsupportedFeature(MolswapError):
    """Syntactically recognizable SMILES feature outside the supported subset."""


class ValenceError(MolswapError):
    """Explicit bonds exceed an atom's standard valence."""


class NotConnected(MolswapError):
    """Operation requires a connected graph."""


class NotBonded(MolswapError):
    """Operation requires the two atoms to share a bond."""


class InfeasibleMove(MolswapError):
    """Double edge swap cannot be applied to this graph."""


class NoFeasibleMove(MolswapError):
    """Graph admits no feasible double edge swap."""


class InfeasibleFormula(MolswapError):
    """No connected, valence-saturated graph realizes the formula."""


class DimensionMismatch(MolswapError):
    """Model input widths do not match the audited feature widths."""


class TimeOutOfRange(MolswapError):
    """Normalized diffusion time must lie in [0, 1]."""


class NonFiniteGradient(MolswapError):
    """A gradient became NaN or infinite during the backward pass."""


class CorruptFile(MolswapError):
    """Weights or checkpoint file is malformed or truncated."""


class VersionMismatch(MolswapError):
    """Weights file version or variant does not match what was requested."""


class EmptySample(MolswapError):
    """Metric requires a nonempty sample."""


class EmptyDataset(MolswapError):
    """Training requires a nonempty dataset."""


class EmptyLog(MolswapError):
    """Analysis requires a nonempty response log."""


class DataError(MolswapError):
    """Input data cannot be processed (CLI exit code 2)."""
