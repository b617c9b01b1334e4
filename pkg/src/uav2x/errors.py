"""Exception hierarchy shared by the simulator modules."""


class Uav2xError(Exception):
    """Base class for all package errors."""


class ConfigError(Uav2xError, ValueError):
    """Invalid or unreadable configuration."""


class DomainError(Uav2xError, ValueError):
    """Argument outside the domain of a physical formula."""


class CategorizationError(Uav2xError):
    """U2U UAVs exist but no U2I UAV is available to relay for them."""


class ConstraintViolation(Uav2xError, ValueError):
    """An allocation matrix breaks one of the allocation constraints.

    ``constraint`` names the violated rule: ``"binary"``,
    ``"subchannel-exclusive"``, ``"link-capacity"`` or ``"u2u-min-rate"``.
    """

    def __init__(self, constraint, message):
        super().__init__(f"[{constraint}] {message}")
        self.constraint = constraint


class HorizonInfeasible(Uav2xError):
    """A UAV can no longer finish its trajectory within the horizon."""


class ContractError(Uav2xError, ValueError):
    """A caller broke a documented precondition (e.g. an infeasible B&B seed)."""
