from enum import Enum
from typing import Any


def _normalize(value: Any) -> str:
    return str(value).strip().lower().replace("_", "-")


class ErrorFormatterMixin:
    """Mixin class that formats an invalid value when constructing an enum."""

    __error_format__ = "Invalid option `{0}` for `{1}`. Valid options are: `{2}`."

    @classmethod
    def _format(cls, value: Any) -> str:
        return cls.__error_format__.format(value, cls.__name__, [m.value for m in cls])  # type: ignore[attr-defined]


class ModeEnum(ErrorFormatterMixin, str, Enum):
    """
    String enum which prints the available values when an invalid value has been passed.

    Lookup is lenient: case, surrounding whitespace and ``-`` versus ``_`` are ignored,
    so ``"No_Curriculum"`` resolves to the same member as ``"no-curriculum"``.
    """

    @classmethod
    def _missing_(cls, value: object) -> "ModeEnum":
        key = _normalize(value)
        for member in cls:
            if _normalize(member.value) == key:
                return member
        raise ValueError(cls._format(value))

    def __repr__(self) -> str:
        return str(self)

    def __str__(self) -> str:
        return str(self.value)

    @property
    def s(self) -> str:
        """Return the :attr:`value` as :class:`str`."""
        return str(self.value)

    @property
    def v(self) -> Any:
        """Alias for :attr:`value`."""
        return self.value
