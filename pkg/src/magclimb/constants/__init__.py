from magclimb.constants._constants import (
    LEGS,
    Ablation,
    Activation,
    Baseline,
    GateReason,
    TerminationCause,
)
from magclimb.constants._pkg_constants import Key
