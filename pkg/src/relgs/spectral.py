"""Periodic pseudospectral representation of fields and of (-Delta + m^2)^s.

Transform normalization (fixed everywhere in the package):

* forward transform is unnormalized, ``u_hat[j] = sum_n u[n] exp(-i k_j x_n)``;
* inverse transform carries the ``1/n^N`` factor.

With this convention Parseval reads

    sum |u|^2 dx^N = sum |u_hat|^2 * dx^N / n^N

and ``SPECTRAL_WEIGHT_DOC`` is written into every output header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as sfft

FFT_NORMALIZATION = "forward-unnormalized,inverse-1/n^N"
SPECTRAL_WEIGHT_DOC = "parseval: sum|u|^2 dx^N = sum|u_hat|^2 dx^N/n^N"

# largest grid accepted (points), about 2 GiB of complex128 per field
MAX_GRID_POINTS = 2**27
HERMITIAN_TOL = 1e-8


class SpectralDataError(ValueError):
    """Spectral coefficients are too far from Hermitian to represent a real field."""


def critical_exponent(N: int, s: float) -> float:
    """Return 2N/(N-2s), or ``inf`` when N <= 2s (no upper bound on p)."""
    if N <= 2 * s:
        return math.inf
    return 2 * N / (N - 2 * s)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of [(-Delta+m^2)^s - m^(2s)] u + mu u = |u|^(p-2) u in R^N."""

    s: float
    m: float
    mu: float
    p: float
    N: int = 1

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "p", float(self.p))
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s in (0,1) required, got s={self.s}")
        if not self.m >= 0.0:
            raise ValueError(f"m >= 0 required, got m={self.m}")
        if not self.mu > 0.0:
            raise ValueError(f"mu > 0 required, got mu={self.mu}")
        p_crit = critical_exponent(self.N, self.s)
        if not 2.0 < self.p < p_crit:
            raise ValueError(
                f"p in (2, 2N/(N-2s)) required; critical exponent for N={self.N}, "
                f"s={self.s} is {p_crit}, got p={self.p}"
            )

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.N, self.s)

    @property
    def mass_shift(self) -> float:
        """m^(2s); zero when m = 0."""
        return self.m ** (2 * self.s) if self.m > 0 else 0.0

    def with_mass(self, m: float) -> "ModelParams":
        return ModelParams(s=self.s, m=m, mu=self.mu, p=self.p, N=self.N)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the box [-L/2, L/2)^N with n points per dimension."""

    n: int
    L: float
    N: int = 1

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 2 or n & (n - 1):
            raise ValueError(f"n_per_dim must be a power of two >= 2, got {self.n!r}")
        if not self.L > 0:
            raise ValueError(f"box_length must be positive, got {self.L!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if n ** int(self.N) > MAX_GRID_POINTS:
            raise ValueError(
                f"grid of {n}^{self.N} points exceeds the limit of {MAX_GRID_POINTS}"
            )
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.N

    @property
    def size(self) -> int:
        return self.n**self.N

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.N

    @property
    def volume(self) -> float:
        return self.L**self.N

    @property
    def spectral_weight(self) -> float:
        """Factor turning sum |u_hat|^2 into the L^2 integral (Parseval)."""
        return self.cell_volume / self.size

    @cached_property
    def x(self) -> np.ndarray:
        """1-D coordinates; x = 0 sits at index n // 2."""
        return -self.L / 2 + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """1-D wavenumbers 2*pi*j/L in FFT order."""
        return 2 * np.pi * sfft.fftfreq(self.n, d=1.0 / self.n) / self.L

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.x] * self.N), indexing="ij", sparse=True)

    def radius(self, center=None) -> np.ndarray:
        """Distance of each grid point from ``center`` (default: origin), no wrap."""
        center = np.zeros(self.N) if center is None else np.asarray(center, float)
        r2 = sum((c - x0) ** 2 for c, x0 in zip(self.coords(), center))
        return np.sqrt(r2) * np.ones(self.shape)

    @cached_property
    def k_sq(self) -> np.ndarray:
        ks = np.meshgrid(*([self.k] * self.N), indexing="ij", sparse=True)
        out = sum(kj**2 for kj in ks)
        out = np.broadcast_to(out, self.shape).copy()
        out.setflags(write=False)
        return out

    @property
    def center_index(self) -> tuple[int, ...]:
        return (self.n // 2,) * self.N


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RealField:
    """Real samples of a field on a :class:`Grid` (stored with shape ``grid.shape``)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "RealField":
        return cls(grid, np.broadcast_to(func(*grid.coords()), grid.shape))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __add__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RealField":
        return RealField(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "RealField":
        return RealField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Unnormalized DFT coefficients of a field, same layout as :class:`RealField`."""

    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).reshape(self.grid.shape)
        object.__setattr__(self, "coefficients", _frozen(c))


def forward_transform(u: RealField) -> SpectralField:
    return SpectralField(u.grid, sfft.fftn(u.values))


def inverse_transform(w: SpectralField, tol: float = HERMITIAN_TOL) -> RealField:
    """Inverse DFT, projecting onto real fields.

    Raises :class:`SpectralDataError` when the anti-Hermitian part of the
    coefficients exceeds ``tol`` relative to the total.
    """
    z = sfft.ifftn(w.coefficients)
    scale = np.linalg.norm(z)
    if scale > 0 and np.linalg.norm(z.imag) > tol * scale:
        raise SpectralDataError(
            "spectral coefficients violate Hermitian symmetry "
            f"(relative imaginary part {np.linalg.norm(z.imag) / scale:.3e} > {tol:g})"
        )
    return RealField(w.grid, z.real)


def symbol(k_sq, params: ModelParams):
    """(|k|^2 + m^2)^s, elementwise."""
    k_sq = np.asarray(k_sq, dtype=float)
    if np.any(k_sq < 0):
        raise ValueError("k_sq must be nonnegative")
    out = (k_sq + params.m**2) ** params.s
    return out if out.ndim else float(out)


def operator_multiplier(k_sq, params: ModelParams):
    """(|k|^2 + m^2)^s - m^(2s), evaluated without cancellation for small k."""
    k_sq = np.asarray(k_sq, dtype=float)
    if params.m == 0:
        return k_sq**params.s
    m2 = params.m**2
    return params.mass_shift * np.expm1(params.s * np.log1p(k_sq / m2))


def _apply_multiplier(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return sfft.ifftn(sfft.fftn(values) * mult).real


def apply_operator(u: RealField, params: ModelParams) -> RealField:
    """[(-Delta+m^2)^s - m^(2s)] u via the Fourier symbol."""
    mult = operator_multiplier(u.grid.k_sq, params)
    return RealField(u.grid, _apply_multiplier(u.values, mult))


def apply_resolvent(f: RealField, params: ModelParams) -> RealField:
    """Solve [(-Delta+m^2)^s - m^(2s) + mu] u = f."""
    mult = 1.0 / (operator_multiplier(f.grid.k_sq, params) + params.mu)
    return RealField(f.grid, _apply_multiplier(f.values, mult))


def inner(u: RealField, w: RealField) -> float:
    """L^2 inner product by grid quadrature."""
    return float(np.vdot(u.values, w.values).real * u.grid.cell_volume)


def hs_norm_sq(u: RealField, params: ModelParams) -> float:
    """Discrete int (|k|^2+m^2)^s |F u|^2 dk (equals <(A + m^(2s)) u, u>)."""
    coef = sfft.fftn(u.values)
    weights = symbol(u.grid.k_sq, params)
    return float(np.sum(weights * np.abs(coef) ** 2) * u.grid.spectral_weight)


def operator_form(u: RealField, params: ModelParams) -> float:
    """<[(-Delta+m^2)^s - m^(2s)] u, u>, computed spectrally (no cancellation)."""
    coef = sfft.fftn(u.values)
    weights = operator_multiplier(u.grid.k_sq, params)
    return float(np.sum(weights * np.abs(coef) ** 2) * u.grid.spectral_weight)


def lp_norm(u: RealField, q: float) -> float:
    """|u|_{L^q} by the dx^N-weighted grid sum; ``q = inf`` gives max|u|."""
    a = np.abs(u.values)
    if q == math.inf:
        return float(a.max())
    if q < 1:
        raise ValueError(f"q >= 1 required, got {q}")
    scale = a.max()
    if scale == 0:
        return 0.0
    return float(scale * (np.sum((a / scale) ** q) * u.grid.cell_volume) ** (1.0 / q))


def lp_power(u: RealField, q: float) -> float:
    """int |u|^q by grid quadrature (no root taken)."""
    return float(np.sum(np.abs(u.values) ** q) * u.grid.cell_volume)


def shift(u: RealField, offset) -> RealField:
    """Translate ``u`` by ``offset`` (physical units) with a spectral phase shift."""
    offset = np.broadcast_to(np.asarray(offset, dtype=float), (u.grid.N,))
    ks = np.meshgrid(*([u.grid.k] * u.grid.N), indexing="ij", sparse=True)
    phase = np.exp(-1j * sum(kj * d for kj, d in zip(ks, offset)))
    coef = sfft.fftn(u.values) * phase
    # a fractional shift makes the Nyquist coefficient complex; its imaginary part is dropped
    return RealField(u.grid, sfft.ifftn(coef).real)


def default_box_length(params: ModelParams) -> float:
    """Heuristic box size 40/sqrt(mu), four times larger when m = 0.

    Ground states decay exponentially for m > 0 but only algebraically at
    m = 0, where the box must be much wider.
    """
    L = 40.0 / math.sqrt(params.mu)
    return 4.0 * L if params.m == 0 else L
