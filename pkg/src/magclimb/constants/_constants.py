"""Constants that user deals with."""

from enum import unique

from magclimb.constants._utils import ModeEnum

LEGS: tuple[str, ...] = ("RR", "FR", "RL", "FL")


@unique
class GateReason(ModeEnum):
    """Outcome of the adhesion gate, listed in evaluation order."""

    OK = "ok"
    NO_CONTACT_CONF = "no-contact-conf"
    MAGNET_OFF = "magnet-off"
    STOCHASTIC_FAIL = "stochastic-fail"
    MISALIGNED = "misaligned"
    NON_FERROMAGNETIC = "non-ferromagnetic"

    @property
    def code(self) -> int:
        """Integer code used in batched arrays."""
        return list(GateReason).index(self)

    @classmethod
    def from_code(cls, code: int) -> "GateReason":
        return list(cls)[int(code)]


@unique
class Ablation(ModeEnum):
    FULL = "full"
    NO_CURRICULUM = "no-curriculum"
    NO_PROBABILISTIC = "no-probabilistic"
    NO_MODELING = "no-modeling"

    @property
    def label(self) -> str:
        """Condition name used in metric reports."""
        return {
            Ablation.FULL: "Full",
            Ablation.NO_CURRICULUM: "w/o Curriculum",
            Ablation.NO_PROBABILISTIC: "w/o Probabilistic",
            Ablation.NO_MODELING: "w/o Modeling",
        }[self]


@unique
class TerminationCause(ModeEnum):
    NONE = "none"
    FELL = "fell"
    FROZEN = "frozen"
    NON_FINITE = "non_finite"

    @property
    def code(self) -> int:
        return list(TerminationCause).index(self)

    @classmethod
    def from_code(cls, code: int) -> "TerminationCause":
        return list(cls)[int(code)]


@unique
class Activation(ModeEnum):
    TANH = "tanh"
    ELU = "elu"
    SELU = "selu"
    RELU = "relu"
    LRELU = "lrelu"
    SIGMOID = "sigmoid"


@unique
class Baseline(ModeEnum):
    SCRIPTED = "scripted"
