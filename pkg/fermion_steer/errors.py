#!/bin/env python3


class FermionSteerError(Exception):
    pass


class DimensionError(FermionSteerError, ValueError):
    pass


class NotUnitaryError(FermionSteerError, ValueError):
    pass


class CorruptStateError(FermionSteerError, ValueError):
    """
    Raised when a correlation matrix leaves the physical domain, for example
    a Born probability outside [0, 1] beyond tolerance.
    """
    pass


class GapClosedError(FermionSteerError, ArithmeticError):
    pass


class OrthogonalityError(FermionSteerError, ValueError):
    pass


class ConfigError(FermionSteerError, ValueError):
    def __init__(self, message: str, problems: list=None):
        super().__init__(message)
        self._problems = list(problems) if problems else []

    @property
    def problems(self) -> list:
        return self._problems

    def __str__(self) -> str:
        if not self._problems:
            return super().__str__()
        lines = [super().__str__()]
        lines.extend(f"  - {p}" for p in self._problems)
        return "\n".join(lines)


class SchemaVersionError(FermionSteerError, ValueError):
    pass


class TrajectoryError(FermionSteerError, RuntimeError):
    def __init__(self, index: int, seed: int, cause: str):
        super().__init__(f"trajectory {index} (seed {seed}) failed: {cause}")
        self.index = index
        self.seed = seed
        self.cause = cause

    def __reduce__(self):
        return (TrajectoryError, (self.index, self.seed, self.cause))
