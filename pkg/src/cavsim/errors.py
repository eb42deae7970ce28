"""Exception types shared across the package."""

from typing import Optional


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """A scenario config failed to parse or validate.

    ``key`` is the dotted config key at fault, ``line`` its 1-based line in
    the source document when known.
    """

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None,
                 key: Optional[str] = None):
        self.message = message
        self.line = line
        self.path = path
        self.key = key
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.path or "<config>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"{where}: {self.message}"


class CollisionError(RuntimeError):
    """A bumper-to-bumper gap became non-positive during a run."""

    def __init__(self, time: float, vehicle: int, gap: float):
        self.time = time
        self.vehicle = vehicle
        self.gap = gap
        super().__init__(f"collision at t={time:.6g} s: vehicle {vehicle} gap {gap:.6g} m")
