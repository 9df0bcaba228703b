"""Shared parameter types: adjacency relations, privacy budgets, mechanism specs.

Every mechanism in this package is a density on R^d whose log is Lipschitz
with respect to some norm on the *input* space; the adjacency relation names
that norm.  ``PrivacyParams`` bundles the Lipschitz constant ``epsilon`` with
the adjacency and the block structure (``n`` blocks of ``m`` coordinates), and
``MechanismSpec`` pairs it with a concrete mechanism family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Adjacency(str, Enum):
    """Input-space metric under which privacy is measured."""

    L1 = "l1"
    L2 = "l2"
    COMPOSITE = "composite"  # sum over blocks of per-block l2 distances


class MechanismKind(str, Enum):
    LAPLACE_1D = "laplace1d"
    PRODUCT_L1 = "product_l1"
    RADIAL_L2 = "radial_l2"
    COMPOSITE = "composite"


#: Mechanism family that is MSE-optimal for each adjacency relation.
OPTIMAL_KIND = {
    Adjacency.L1: MechanismKind.PRODUCT_L1,
    Adjacency.L2: MechanismKind.RADIAL_L2,
    Adjacency.COMPOSITE: MechanismKind.COMPOSITE,
}


def _require_positive_float(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise ValueError(f"{name} must be a positive finite float, got {value!r}")
    return value


def _require_positive_int(name: str, value: int) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget and input geometry.

    epsilon:    Lipschitz constant of the log-density (per unit adjacency
                distance).  Must be positive and finite.
    adjacency:  which input norm distances are measured in.
    n:          number of blocks (L1: coordinates; composite: users).
    m:          coordinates per block.  Must be 1 unless adjacency is
                composite (L2 adjacency treats all n coordinates as one
                block; see MechanismSpec.dimension).
    alpha:      optional adjacency radius used by audits; None means the
                caller supplies one per audit.
    """

    epsilon: float
    adjacency: Adjacency = Adjacency.L1
    n: int = 1
    m: int = 1
    alpha: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", _require_positive_float("epsilon", self.epsilon))
        object.__setattr__(self, "adjacency", Adjacency(self.adjacency))
        object.__setattr__(self, "n", _require_positive_int("n", self.n))
        object.__setattr__(self, "m", _require_positive_int("m", self.m))
        if self.alpha is not None:
            object.__setattr__(self, "alpha", _require_positive_float("alpha", self.alpha))
        if self.adjacency is not Adjacency.COMPOSITE and self.m != 1:
            raise ValueError(
                f"m={self.m} requires composite adjacency; {self.adjacency.value} blocks are scalar"
            )


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism family instantiated with concrete parameters.

    The kind must be consistent with the block structure of ``params``:
    laplace1d is strictly one-dimensional, product_l1 and radial_l2 use
    n scalar coordinates, composite uses n blocks of m coordinates.
    """

    kind: MechanismKind
    params: PrivacyParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MechanismKind(self.kind))
        p = self.params
        if self.kind is MechanismKind.LAPLACE_1D and p.n * p.m != 1:
            raise ValueError(f"laplace1d is one-dimensional, got n={p.n}, m={p.m}")
        if self.kind in (MechanismKind.PRODUCT_L1, MechanismKind.RADIAL_L2) and p.m != 1:
            raise ValueError(f"{self.kind.value} takes scalar blocks, got m={p.m}")

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def dimension(self) -> int:
        """Total output dimension n*m."""
        return self.params.n * self.params.m

    @staticmethod
    def optimal_for(params: PrivacyParams) -> "MechanismSpec":
        """The MSE-optimal mechanism for the given adjacency and shape."""
        kind = OPTIMAL_KIND[params.adjacency]
        if kind is MechanismKind.PRODUCT_L1 and params.n == 1:
            kind = MechanismKind.LAPLACE_1D
        return MechanismSpec(kind, params)


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid [lo, hi] with the given step.

    (hi - lo) / step must be an integer count >= 2 (up to 1e-9 relative
    slack, so steps like 0.1 survive binary rounding).
    """

    lo: float
    hi: float
    step: float
    count: int = field(init=False)  # number of steps; points() has count+1 entries

    def __post_init__(self) -> None:
        lo, hi, step = float(self.lo), float(self.hi), float(self.step)
        if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
            raise ValueError("grid bounds and step must be finite")
        if step <= 0 or hi <= lo:
            raise ValueError(f"need lo < hi and step > 0, got [{lo}, {hi}] step {step}")
        ratio = (hi - lo) / step
        count = round(ratio)
        if count < 2 or abs(ratio - count) > 1e-9 * max(1.0, count):
            raise ValueError(f"(hi-lo)/step = {ratio} is not an integer count >= 2")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "count", count)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count + 1)

    def refined(self, factor: int) -> "Grid1D":
        """Same interval with the step divided by ``factor``."""
        return Grid1D(self.lo, self.hi, self.step / factor)
