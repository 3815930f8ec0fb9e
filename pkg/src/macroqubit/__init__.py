"""Photon-loss decoherence of amplified macro-qubits in a truncated two-mode Fock space."""

__version__ = "0.1.0"

from .channels import FactoredLoss, LossParams, apply_loss, loss_kraus, lossy_density
from .errors import (
    CutoffError,
    FilterError,
    IncompatibleSpaceError,
    InvariantError,
    MacroQubitError,
    NormalizationError,
    TruncationError,
)
from .fock import (
    CIRCULAR,
    DIAGONAL,
    HV,
    DensityOperator,
    ModeUnitary,
    PolarizationBasis,
    PureState,
    TwoModeSpace,
    equatorial_basis,
)
from .metrics import (
    bures_distance,
    coherent_mqs_distance_closed,
    coherent_mqs_distance_exact,
    coherent_pointer_distance_closed,
    fidelity,
    sweep_distance,
)
from .ofilter import OFThreshold, apply_filter, filtered_distance, filtered_sweep
from .states import (
    GainParams,
    amplified_pole_state,
    coherent_mqs,
    coherent_state,
    macro_qubit,
    mqs_superposition,
)
