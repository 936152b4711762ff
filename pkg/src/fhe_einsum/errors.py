"""Exception hierarchy.

Validation errors (bad equations, bad shapes) derive from ``EinsumError``;
capacity errors (too many slots, not enough levels) derive from
``CapacityError``. The CLI maps the two families to different exit codes.
"""


class EinsumError(ValueError):
    """Invalid einsum equation or operand shapes."""


class MalformedEquation(EinsumError):
    pass


class ImplicitOutput(MalformedEquation):
    """Equation has no '->' (implicit output mode is not supported)."""


class RankMismatch(EinsumError):
    pass


class SizeConflict(EinsumError):
    pass


class UnknownOutputLabel(EinsumError):
    pass


class RepeatedLabel(EinsumError):
    """A label occurs twice within one operand (diagonal extraction)."""


class LengthMismatch(ValueError):
    """Slot array length does not match the backend slot count."""


class CapacityError(RuntimeError):
    pass


class DoesNotFit(CapacityError):
    """Broadcast layout needs more slots than a single vector holds."""


class LevelExhausted(CapacityError):
    """Multiplication requested at level 0; a bootstrap would be required."""
