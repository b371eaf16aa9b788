"""Bessel-potential (singular integral) representation of the operator.

For m > 0,

    [(-Delta+m^2)^s - m^(2s)] u(x)
        = c_{N,s} m^nu P.V. int (u(x) - u(y)) K_nu(m|x-y|) / |x-y|^nu dy,

with nu = (N+2s)/2.  This path exists to cross-check the spectral symbol;
it is far too slow for production solves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral import ModelParams, RealField

_EPS = 1e-16
_MAXIT = 10000

# Taylor coefficients of 1/Gamma(1+x) about x = 0
_RGAMMA_COEF = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
)


class BoundarySupportWarning(RuntimeWarning):
    """The field is not negligible on the box boundary; quadrature is unreliable."""


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    even = sum(c * mu**k for k, c in enumerate(_RGAMMA_COEF) if k % 2 == 0)
    odd = sum(c * mu ** (k - 1) for k, c in enumerate(_RGAMMA_COEF) if k % 2 == 1)
    gampl = even + mu * odd
    gammi = even - mu * odd
    return -odd, even, gampl, gammi


def _k_small(mu: float, x: float) -> tuple[float, float]:
    """K_mu(x), K_{mu+1}(x) by Temme's series; x <= 2, |mu| <= 1/2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    e = math.exp(e)
    p = 0.5 * e / gampl
    q = 0.5 / (e * gammi)
    c = 1.0
    d = x2 * x2
    total1 = p
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= d / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if abs(delta) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"Temme series did not converge (mu={mu}, x={x})")
    return total, total1 * 2.0 / x


def _k_cf2(mu: float, x: float) -> tuple[float, float]:
    """K_mu(x), K_{mu+1}(x) by Steed's continued fraction; x > 2, |mu| <= 1/2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise ArithmeticError(f"continued fraction did not converge (mu={mu}, x={x})")
    h *= a1
    kmu = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    return kmu, kmu * (mu + x + 0.5 - h) / x


def _k_asymptotic(nu: float, x: float) -> float:
    """Hankel expansion, summed up to its smallest term.

    Terms may grow while (2k-1)^2 < 4 nu^2, so truncation is only allowed
    once k exceeds nu + 1/2.
    """
    four_nu2 = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    for k in range(1, 400):
        nxt = term * (four_nu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(nxt) >= abs(term) and k > nu + 0.5:
            break
        term = nxt
        total += term
        if abs(term) < _EPS * abs(total):
            break
    return math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) * total


def asymptotic_crossover(nu: float) -> float:
    """Argument above which the Hankel expansion is used directly."""
    return max(2.0 * abs(nu) + 10.0, 25.0)


def _bessel_k_scalar(nu: float, z: float) -> float:
    if not z > 0:
        raise ValueError(f"bessel_k requires z > 0, got z={z}")
    nu = abs(nu)
    if z >= asymptotic_crossover(nu):
        return _k_asymptotic(nu, z)
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu, k1 = _k_small(mu, z) if z <= 2.0 else _k_cf2(mu, z)
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / z) * k1 + kmu
    return kmu


_bessel_k_vec = np.vectorize(_bessel_k_scalar, otypes=[float])


def bessel_k(nu, z):
    """Modified Bessel function of the second kind K_nu(z) for real nu and z > 0.

    Temme's series for z <= 2, Steed's continued fraction up to the
    asymptotic crossover (see :func:`asymptotic_crossover`), Hankel's
    expansion beyond.  Orders are reduced to |mu| <= 1/2 and raised by the
    (stable) forward recurrence.
    """
    if np.ndim(nu) == 0 and np.ndim(z) == 0:
        return _bessel_k_scalar(float(nu), float(z))
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("bessel_k requires z > 0")
    return _bessel_k_vec(nu, z)


def kernel_order(params: ModelParams) -> float:
    return (params.N + 2 * params.s) / 2


def kernel_constant(params: ModelParams) -> float:
    """c_{N,s} = 2^(1-(N+2s)/2) pi^(-N/2) 2^(2s) s(1-s) / Gamma(2-s)."""
    N, s = params.N, params.s
    return (
        2.0 ** (1 - (N + 2 * s) / 2)
        * math.pi ** (-N / 2)
        * 2.0 ** (2 * s)
        * s
        * (1 - s)
        / math.gamma(2 - s)
    )


def kernel_value(r, params: ModelParams):
    """c_{N,s} m^nu K_nu(m r) / r^nu, the jump kernel of the operator."""
    if not params.m > 0:
        raise ValueError("the Bessel kernel needs m > 0")
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("kernel_value requires r > 0")
    nu = kernel_order(params)
    out = kernel_constant(params) * params.m**nu * bessel_k(nu, params.m * r) / r**nu
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class KernelParams:
    """Quadrature settings for :func:`apply_operator_quadrature`.

    ``quad_points`` is the number of lattice points per dimension used for
    the quadrature; it must divide the field's grid size, and the field is
    sampled with stride ``n // quad_points``.  ``quad_cutoff_radius``
    defaults to 15/m.
    """

    model: ModelParams
    quad_cutoff_radius: float | None = None
    quad_points: int | None = None

    def __post_init__(self):
        if not self.model.m > 0:
            raise ValueError("KernelParams requires m > 0")
        if self.quad_cutoff_radius is None:
            object.__setattr__(self, "quad_cutoff_radius", 15.0 / self.model.m)
        if not self.quad_cutoff_radius > 0:
            raise ValueError("quad_cutoff_radius must be positive")
        if self.quad_points is not None and self.quad_points < 16:
            raise ValueError(f"quad_points >= 16 required, got {self.quad_points}")


@lru_cache(maxsize=32)
def _lattice(params: ModelParams, h: float, J: int, R: float):
    """Offsets (integer multiples of h) inside the ball 0 < |z| <= R, kernel values,
    and the lattice sum of |z|^2 k(|z|) h^N."""
    N = params.N
    ax = np.arange(-J, J + 1)
    grids = np.meshgrid(*([ax] * N), indexing="ij")
    offsets = np.stack([g.reshape(-1) for g in grids], axis=1)
    r = h * np.sqrt(np.sum(offsets.astype(float) ** 2, axis=1))
    keep = (r > 0) & (r <= R)
    offsets, r = offsets[keep], r[keep]
    r_unique, inverse = np.unique(np.round(r / h, 12), return_inverse=True)
    kvals = kernel_value(r_unique * h, params)[inverse]
    quad_sum = float(np.sum(r**2 * kvals) * h**N)
    return offsets, kvals, quad_sum


@lru_cache(maxsize=32)
def _second_moment(params: ModelParams, R: float) -> float:
    """int_{|z|<=R} |z|^2 k(|z|) dz, by adaptive radial quadrature."""
    N = params.N
    sphere = 2 * math.pi ** (N / 2) / math.gamma(N / 2)

    def integrand(r):
        return r ** (N + 1) * kernel_value(r, params)

    # split at 1/m: the kernel singularity and the exponential scale are separated
    brk = min(R, 1.0 / params.m)
    val, _ = integrate.quad(integrand, 0.0, brk, limit=200, epsabs=0, epsrel=1e-12)
    if R > brk:
        tail, _ = integrate.quad(integrand, brk, R, limit=200, epsabs=0, epsrel=1e-12)
        val += tail
    return sphere * val


def _boundary_max(values: np.ndarray) -> float:
    out = 0.0
    for axis in range(values.ndim):
        out = max(out, np.abs(values.take([0, -1], axis=axis)).max())
    return out


def apply_operator_quadrature(
    u: RealField, x_index, params: KernelParams
) -> float:
    """Evaluate [(-Delta+m^2)^s - m^(2s)] u at one grid point by direct quadrature.

    The principal value is handled by pairing y = x +/- z (the integrand
    becomes a second difference), summing over a tensor lattice restricted
    to 0 < |z| <= cutoff and replacing the lattice sum of the quadratic
    Taylor part by its exact integral, using a 4th-order finite-difference
    Laplacian at x.  Periodic wrap is used for points leaving the box.
    """
    grid = u.grid
    model = params.model
    if model.N != grid.N:
        raise ValueError("model and grid dimensions differ")
    qp = grid.n if params.quad_points is None else int(params.quad_points)
    if qp > grid.n or grid.n % qp:
        raise ValueError(f"quad_points={qp} must divide the grid size n={grid.n}")
    stride = grid.n // qp
    h = grid.dx * stride

    vals = u.values
    umax = np.abs(vals).max()
    if umax > 0 and _boundary_max(vals) >= 1e-8 * umax:
        warnings.warn(
            "field is not negligible on the box boundary; quadrature result is unreliable",
            BoundarySupportWarning,
            stacklevel=2,
        )

    J = min(int(math.floor(params.quad_cutoff_radius / h + 1e-12)), qp // 2 - 1)
    R = min(params.quad_cutoff_radius, J * h)
    offsets, kvals, lattice_moment = _lattice(model, h, J, R)

    idx = np.asarray(x_index, dtype=int).reshape(grid.N)
    ux = vals[tuple(idx)]
    targets = (idx[None, :] + stride * offsets) % grid.n
    uy = vals[tuple(targets.T)]
    total = float(np.sum((ux - uy) * kvals) * h**grid.N)

    lap = 0.0
    for axis in range(grid.N):
        def at(j, axis=axis):
            t = idx.copy()
            t[axis] = (t[axis] + j * stride) % grid.n
            return vals[tuple(t)]

        lap += (-at(2) + 16 * at(1) - 30 * ux + 16 * at(-1) - at(-2)) / (12 * h * h)
    moment = _second_moment(model, R)
    total -= lap / (2 * grid.N) * (moment - lattice_moment)
    return total
