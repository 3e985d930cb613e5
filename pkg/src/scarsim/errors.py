"""Exception types raised across the package."""


class ScarsimError(Exception):
    """Base class for all package errors."""


class BasisSizeError(ScarsimError):
    """Chain length outside the supported 1..32 range."""


class UnsupportedSymmetryError(ScarsimError):
    """Requested symmetry sector is incompatible with the basis."""


class BasisMismatchError(ScarsimError):
    """Operator/state dimensions or basis tags do not agree."""


class ShapeError(ScarsimError):
    """Modulation unit cell does not divide the chain length."""


class PropagationError(ScarsimError):
    """Krylov propagation failed to converge within the substep budget."""


class ScheduleError(ScarsimError):
    """Time-dependent schedule evaluated at a pole or returned non-finite values."""


class WindowError(ScarsimError):
    """Requested time window contains no samples."""


class PeakDetectionError(ScarsimError):
    """No interior fidelity maximum found after the initial decay."""


class SpectralEdgeError(ScarsimError):
    """Target energy sits at the spectral edge; inverse temperature unbounded."""


class BracketError(ScarsimError):
    """Root bracketing failed for the inverse-temperature solve."""


class SolverError(ScarsimError):
    """Iterative eigensolver did not reach the requested residual."""


class PreparationError(ScarsimError):
    """Ramp never produced a usable overlap with the target state."""
