"""Noise mechanisms whose log-densities are epsilon-Lipschitz, plus controls.

The four mechanism families (see :class:`~lipnoise.params.MechanismKind`):

* ``laplace1d``   density (eps/2) e^{-eps|v|} on R; MSE 2/eps^2.
* ``product_l1``  density (eps/2)^n e^{-eps ||v||_1} on R^n; log-density is
                  eps-Lipschitz in the l-infinity dual sense, i.e. under l1
                  input perturbations; MSE 2n/eps^2.
* ``radial_l2``   density c_n e^{-eps ||v||_2} on R^n with
                  c_n = eps^n Gamma(n/2+1) / (pi^{n/2} Gamma(n+1));
                  MSE n(n+1)/eps^2.
* ``composite``   n independent radial_l2 blocks of dimension m; the
                  log-density is eps-Lipschitz per block, which is what the
                  summed per-block l2 adjacency requires; MSE n m(m+1)/eps^2.

Two deliberately non-private or non-Lipschitz controls live here too: a
staircase density (piecewise-constant quantization of the Laplace shape,
whose log-density jumps at cell edges) and a Gaussian (smooth, but its
log-density slope grows linearly without bound).  Audits must flag both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .params import Grid1D, MechanismKind, MechanismSpec

#: Largest supported dimension for the radial normalization constant.
MAX_RADIAL_DIM = 64


# ---------------------------------------------------------------------------
# log-densities and normalization constants


def laplace1d_log_density(v, eps: float):
    """log of (eps/2) e^{-eps|v|}, elementwise."""
    _check_eps(eps)
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("v must be finite")
    out = math.log(eps / 2.0) - eps * np.abs(v)
    return out if out.ndim else float(out)


def laplace1d_cdf(x, eps: float):
    """Exact CDF of the one-dimensional mechanism."""
    _check_eps(eps)
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, 0.5 * np.exp(eps * np.minimum(x, 0.0)),
                   1.0 - 0.5 * np.exp(-eps * np.maximum(x, 0.0)))
    return out if out.ndim else float(out)


def l2_normalization(n: int, eps: float) -> float:
    """Constant c_n making c_n e^{-eps ||v||_2} a density on R^n.

    c_n = eps^n Gamma(n/2 + 1) / (pi^{n/2} Gamma(n + 1)), computed in
    log-space so large n cannot overflow.  Supported range n <= 64; beyond
    that the constant underflows double precision for moderate eps and the
    request is rejected rather than silently returning 0.
    """
    _check_eps(eps)
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if n > MAX_RADIAL_DIM:
        raise ValueError(f"n={n} outside supported range 1..{MAX_RADIAL_DIM}")
    if n == 1:
        return eps / 2.0  # Gamma(3/2)/(sqrt(pi) Gamma(2)) is exactly 1/2
    log_c = n * math.log(eps) + gammaln(n / 2.0 + 1.0) - (n / 2.0) * math.log(math.pi) - gammaln(n + 1.0)
    return math.exp(log_c)


def radial_l2_log_density(v, eps: float, n: int | None = None):
    """log of c_n e^{-eps ||v||_2}; v has shape (..., n)."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    dim = v.shape[-1] if n is None else n
    r = np.linalg.norm(v, axis=-1)
    out = math.log(l2_normalization(dim, eps)) - eps * r
    return out if out.ndim else float(out)


def product_l1_log_density(v, eps: float):
    """log of (eps/2)^n e^{-eps ||v||_1}; v has shape (..., n)."""
    _check_eps(eps)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    n = v.shape[-1]
    out = n * math.log(eps / 2.0) - eps * np.abs(v).sum(axis=-1)
    return out if out.ndim else float(out)


def composite_log_density(v, eps: float, n: int, m: int):
    """log-density of n independent m-dimensional radial blocks.

    v has shape (..., n*m); blocks are consecutive coordinate groups.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape[-1] != n * m:
        raise ValueError(f"expected last axis {n * m}, got {v.shape[-1]}")
    blocks = v.reshape(v.shape[:-1] + (n, m))
    radii = np.linalg.norm(blocks, axis=-1)
    out = n * math.log(l2_normalization(m, eps)) - eps * radii.sum(axis=-1)
    return out if out.ndim else float(out)


def log_density(spec: MechanismSpec, v) -> np.ndarray:
    """Dispatch on the mechanism kind; v has shape (..., spec.dimension)."""
    p = spec.params
    if spec.kind is MechanismKind.LAPLACE_1D:
        v = np.asarray(v, dtype=float)
        if v.ndim and v.shape[-1] == 1:
            v = v[..., 0]
        return laplace1d_log_density(v, p.epsilon)
    if spec.kind is MechanismKind.PRODUCT_L1:
        return product_l1_log_density(v, p.epsilon)
    if spec.kind is MechanismKind.RADIAL_L2:
        return radial_l2_log_density(v, p.epsilon, p.n)
    return composite_log_density(v, p.epsilon, p.n, p.m)


def theoretical_mse(spec: MechanismSpec) -> float:
    """E ||V||_2^2 of the mechanism's noise, in closed form."""
    p = spec.params
    if spec.kind is MechanismKind.LAPLACE_1D:
        return 2.0 / p.epsilon**2
    if spec.kind is MechanismKind.PRODUCT_L1:
        return 2.0 * p.n / p.epsilon**2
    if spec.kind is MechanismKind.RADIAL_L2:
        return p.n * (p.n + 1) / p.epsilon**2
    return p.n * p.m * (p.m + 1) / p.epsilon**2


def _check_eps(eps: float) -> None:
    if not isinstance(eps, (int, float, np.floating)) or not math.isfinite(eps) or eps <= 0:
        raise ValueError(f"epsilon must be positive and finite, got {eps!r}")


# ---------------------------------------------------------------------------
# sampling

# Consumption order contract (per batch of `size` samples, in this order):
#   laplace1d   size uniforms (magnitudes), then size uniforms (signs)
#   product_l1  size*n uniforms (magnitudes), then size*n uniforms (signs),
#               both filled row-major over (size, n)
#   radial_l2   size*n uniforms (Gamma(n) magnitude via sum of exponentials,
#               row-major over (size, n)), then size*n normals (direction)
#   composite   size*n*m uniforms (row-major over (size, n, m)), then
#               size*n*m normals
# Changing any of this bumps rng.STREAM_VERSION.


def _exponential_from_uniform(u: np.ndarray, eps: float) -> np.ndarray:
    # u in [0, 1): -log1p(-u) is Exp(1) without ever taking log(0)
    return -np.log1p(-u) / eps


def sample(spec: MechanismSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw noise vectors; shape (size, dimension), or (dimension,) if size is None.

    The draw order is fixed (see the consumption contract above) so a given
    (seed, spec, size) triple yields identical output across platforms.
    """
    squeeze = size is None
    count = 1 if squeeze else int(size)
    if count < 0:
        raise ValueError(f"size must be >= 0, got {size}")
    p = spec.params
    eps = p.epsilon

    if spec.kind is MechanismKind.LAPLACE_1D:
        mag = _exponential_from_uniform(rng.random(count), eps)
        sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        out = (sign * mag)[:, None]
    elif spec.kind is MechanismKind.PRODUCT_L1:
        mag = _exponential_from_uniform(rng.random((count, p.n)), eps)
        sign = np.where(rng.random((count, p.n)) < 0.5, -1.0, 1.0)
        out = sign * mag
    elif spec.kind is MechanismKind.RADIAL_L2:
        out = _radial_block(rng, count, p.n, eps)
    else:
        u = rng.random((count, p.n, p.m))
        radii = _exponential_from_uniform(u, eps).sum(axis=-1)  # Gamma(m, 1/eps) per block
        z = rng.standard_normal((count, p.n, p.m))
        out = (radii / np.linalg.norm(z, axis=-1))[..., None] * z
        out = out.reshape(count, p.n * p.m)
    return out[0] if squeeze else out


def _radial_block(rng: np.random.Generator, count: int, n: int, eps: float) -> np.ndarray:
    # magnitude Gamma(n, scale 1/eps) as a sum of n exponentials (n is a
    # small integer by construction), direction uniform on the sphere
    u = rng.random((count, n))
    radii = _exponential_from_uniform(u, eps).sum(axis=-1)
    z = rng.standard_normal((count, n))
    return (radii / np.linalg.norm(z, axis=-1))[:, None] * z


# ---------------------------------------------------------------------------
# density models (closed-form and discretized) for the audit tooling


@dataclass(frozen=True)
class DensityModel:
    """A density on R^dimension that audits can probe pointwise.

    log_density maps arrays of shape (..., dimension) (or plain scalars when
    dimension == 1) to log-density values; normalization is the constant
    scaling the bare shape into a density.  block_count > 1 marks densities
    with per-block Lipschitz structure (composite mechanisms), which audits
    need to pick the right dual norm.
    """

    name: str
    dimension: int
    log_density: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    normalization: float
    block_count: int = 1

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not (math.isfinite(self.normalization) and self.normalization > 0):
            raise ValueError(f"normalization must be positive, got {self.normalization!r}")
        if self.block_count < 1 or self.dimension % self.block_count:
            raise ValueError(f"block_count {self.block_count} does not divide dimension {self.dimension}")


def density_model(spec: MechanismSpec) -> DensityModel:
    p = spec.params
    if spec.kind is MechanismKind.LAPLACE_1D:
        return DensityModel("laplace1d", 1, lambda v: laplace1d_log_density(v, p.epsilon), p.epsilon / 2.0)
    if spec.kind is MechanismKind.PRODUCT_L1:
        return DensityModel(
            "product_l1", p.n, lambda v: product_l1_log_density(v, p.epsilon), (p.epsilon / 2.0) ** p.n
        )
    if spec.kind is MechanismKind.RADIAL_L2:
        return DensityModel(
            "radial_l2", p.n, lambda v: radial_l2_log_density(v, p.epsilon, p.n), l2_normalization(p.n, p.epsilon)
        )
    return DensityModel(
        "composite",
        p.n * p.m,
        lambda v: composite_log_density(v, p.epsilon, p.n, p.m),
        l2_normalization(p.m, p.epsilon) ** p.n,
        block_count=p.n,
    )


def gaussian_model(sigma: float) -> DensityModel:
    """Smooth control whose log-density slope |v|/sigma^2 is unbounded."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def logd(v):
        v = np.asarray(v, dtype=float)
        out = math.log(norm) - 0.5 * (v / sigma) ** 2
        return out if out.ndim else float(out)

    return DensityModel("gaussian", 1, logd, norm)


# ---------------------------------------------------------------------------
# staircase control: quantized Laplace shape, log-density jumps at cell edges


@dataclass(frozen=True)
class StaircaseModel:
    """Piecewise-constant density: the Laplace shape frozen at left cell edges.

    Cell k is [k q, (k+1) q); the density there is the Laplace shape at the
    left edge, renormalized.  The total mass works out to
    Z = q (eps/2) (1+x) / (1-x) with x = e^{-eps q}, and the peak density
    (1-x) / (q (1+x)) stays below eps/2, so the *CDF* is still eps-Lipschitz
    even though the log-density jumps by eps*q at every edge.
    """

    eps: float
    quantization: float

    def __post_init__(self) -> None:
        _check_eps(self.eps)
        q = self.quantization
        if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 0):
            raise ValueError(f"quantization must be positive, got {q!r}")
        object.__setattr__(self, "quantization", float(q))

    @property
    def _x(self) -> float:
        return math.exp(-self.eps * self.quantization)

    @property
    def mass(self) -> float:
        """Normalizer Z of the unnormalized left-edge shape."""
        x = self._x
        return self.quantization * (self.eps / 2.0) * (1.0 + x) / (1.0 - x)

    def log_density(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        edges = np.floor(v / self.quantization) * self.quantization
        out = np.asarray(laplace1d_log_density(edges, self.eps)) - math.log(self.mass)
        return out if out.ndim else float(out)

    def cdf(self, v) -> np.ndarray:
        """Exact CDF (piecewise linear)."""
        v = np.asarray(v, dtype=float)
        q, x, eps = self.quantization, self._x, self.eps
        k = np.floor(v / q)
        # mass of cells strictly below k, plus the partial current cell
        below = self._mass_below(k)
        dens = np.exp(laplace1d_log_density(k * q, eps)) / self.mass
        out = below + (v - k * q) * dens
        return out if out.ndim else float(out)

    def _mass_below(self, k: np.ndarray) -> np.ndarray:
        # total mass of cells j < k; cell j has mass cell0 * x^{|j|}
        x = self._x
        cell0 = self.quantization * (self.eps / 2.0) / self.mass
        expo_neg = np.where(k <= 0, 1.0 - k, 0.0)
        expo_pos = np.where(k > 0, k, 1.0)
        below_neg = cell0 * np.power(x, expo_neg) / (1.0 - x)
        below_pos = cell0 * (x + 1.0 - np.power(x, expo_pos)) / (1.0 - x)
        return np.where(k <= 0, below_neg, below_pos)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Consumption order per batch: size uniforms (signed cell index via
        one inverse-CDF pass), then size uniforms (position within the cell)."""
        squeeze = size is None
        count = 1 if squeeze else int(size)
        q, x = self.quantization, self._x
        u = rng.random(count)
        pos = rng.random(count)
        # split [0,1) into cell 0 mass, then the right tail, then the left
        p0 = (1.0 - x) / (1.0 + x)
        half = (1.0 - p0) / 2.0
        tail = u - p0
        right = (tail >= 0.0) & (tail < half)
        left = tail >= half
        sub = np.zeros(count)
        np.divide(tail, half, out=sub, where=right)
        np.divide(tail - half, half, out=sub, where=left)
        sub = np.clip(sub, 0.0, 1.0 - 1e-16)
        # within a tail the cell magnitude is geometric(1-x) on {1, 2, ...}
        j = np.floor(np.log1p(-sub) / math.log(x)) + 1.0
        k = np.where(right, j, 0.0) - np.where(left, j, 0.0)
        out = (k + pos) * q
        return float(out[0]) if squeeze else out

    def model(self) -> DensityModel:
        return DensityModel(
            f"staircase(q={self.quantization:g})", 1, self.log_density, 1.0 / self.mass
        )


def staircase_log_density_1d(v, eps: float, quantization: float):
    return StaircaseModel(eps, quantization).log_density(v)


# ---------------------------------------------------------------------------
# exponential mechanism on a 1D grid


def exp_mechanism_density_1d(
    score: Callable[[float, np.ndarray], np.ndarray],
    eps: float,
    u: float,
    grid: Grid1D,
) -> DensityModel:
    """Discretize w(y) = e^{eps * score(u, y)} on the grid and normalize.

    Returns a DensityModel whose log-density linearly interpolates the grid
    values inside [grid.lo, grid.hi] and is -inf outside.  Because the score
    enters the exponent scaled by eps, an L-Lipschitz score gives an
    eps*L-Lipschitz log-density (restricted to the grid's extent).

    Raises ValueError when the discretized mass is numerically zero or the
    scores are not finite, i.e. the requested density cannot be normalized.
    """
    _check_eps(eps)
    y = grid.points()
    s = np.asarray(score(u, y), dtype=float)
    if s.shape != y.shape:
        raise ValueError(f"score must map the grid to matching shape, got {s.shape} vs {y.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("score values must be finite on the grid")
    logw = eps * s
    shift = logw.max()
    mass = np.trapezoid(np.exp(logw - shift), y)
    if not (math.isfinite(mass) and mass > 0.0):
        raise ValueError("score mass is numerically zero; density cannot be normalized")
    log_z = shift + math.log(mass)
    # the normalizer itself must be a representable double
    if abs(log_z) > 700.0:
        raise ValueError("score mass escapes double precision; density cannot be normalized")
    logd_grid = logw - log_z

    def logd(v):
        v = np.asarray(v, dtype=float)
        out = np.interp(v, y, logd_grid, left=-np.inf, right=-np.inf)
        inside = (v >= grid.lo) & (v <= grid.hi)
        out = np.where(inside, out, -np.inf)
        return out if out.ndim else float(out)

    return DensityModel(f"exp_mechanism(eps={eps:g})", 1, logd, math.exp(-log_z))
