"""Direction-dependent LoS/NLoS path loss.

The number of rectangles crossing a link of length ``r`` at azimuth ``theta``
is Poisson with mean

    lambda_c * (r*L*|sin(phi - theta)| + r*W*|cos(phi - theta)| + W*L),

where (L, W, phi) are the blockage marks. The link is line of sight when the
count is zero, so the LoS probability is the exponential of minus that mean.
A LoS link attenuates as r^-alpha_los, an NLoS link as r^-alpha_nlos with
alpha_los < alpha_nlos.

``los_azimuth_integral`` is the azimuth integral of the LoS probability at
fixed distance (the weight the coverage analysis attaches to a LoS serving
link); it has no elementary closed form because of the absolute values, but
it is bounded above by the closed form ``los_azimuth_integral_bound`` built
from the modified Bessel function I0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import TAU, ParameterError
from .quadrature import QuadratureSpec, integrate_finite

__all__ = [
    "DomainError",
    "NetworkParams",
    "default_params",
    "LinkKind",
    "LinkState",
    "expected_blockage_count",
    "los_probability",
    "nlos_probability",
    "realized_path_loss",
    "bessel_i0",
    "los_azimuth_integral",
    "los_azimuth_integral_bound",
    "mean_los_probability",
]


class DomainError(ValueError):
    """Raised for inputs where the model itself is singular."""


@dataclass(frozen=True)
class NetworkParams:
    """All scalar model parameters.

    Intensities are per square meter, lengths in meters, angles in radians.
    ``sir_threshold`` and ``tx_power`` are linear. Transmit power cancels in
    every SIR expression; it is kept for interface completeness.
    """

    bs_intensity: float
    blockage_intensity: float
    blockage_length: float
    blockage_width: float
    blockage_orientation: float = 0.0
    alpha_los: float = 2.0
    alpha_nlos: float = 5.0
    tx_power: float = 1.0
    sir_threshold: float = 10.0 ** (-0.5)

    def __post_init__(self):
        if not (np.isfinite(self.bs_intensity) and self.bs_intensity >= 0.0):
            raise ParameterError("bs_intensity must be finite and nonnegative")
        if not (np.isfinite(self.blockage_intensity) and self.blockage_intensity >= 0.0):
            raise ParameterError("blockage_intensity must be finite and nonnegative")
        if not (self.blockage_length > 0.0 and self.blockage_width > 0.0):
            raise ParameterError("blockage sides must be positive")
        if not 2.0 <= self.alpha_los < self.alpha_nlos:
            raise ParameterError("need 2 <= alpha_los < alpha_nlos")
        if not self.tx_power > 0.0:
            raise ParameterError("tx_power must be positive")
        if not self.sir_threshold > 0.0:
            raise ParameterError("sir_threshold must be positive")
        object.__setattr__(
            self, "blockage_orientation", float(self.blockage_orientation) % TAU
        )


def default_params(**overrides) -> NetworkParams:
    """Stock configuration: 800 m mean-spacing cells, 15 m x 10 m blockages."""
    base = dict(
        bs_intensity=1.0 / (800.0**2 * math.pi),
        blockage_intensity=0.002,
        blockage_length=15.0,
        blockage_width=10.0,
        blockage_orientation=0.0,
        alpha_los=2.0,
        alpha_nlos=5.0,
        tx_power=1.0,
        sir_threshold=10.0 ** (-0.5),
    )
    base.update(overrides)
    return NetworkParams(**base)


class LinkKind(enum.Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class LinkState:
    kind: LinkKind
    exponent: float
    path_loss: float


def expected_blockage_count(r, theta, params: NetworkParams):
    """Mean number of rectangles crossing a link at distance r, azimuth theta."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ParameterError("distance must be nonnegative")
    rel = params.blockage_orientation - np.asarray(theta, dtype=float)
    out = params.blockage_intensity * (
        r * params.blockage_length * np.abs(np.sin(rel))
        + r * params.blockage_width * np.abs(np.cos(rel))
        + params.blockage_width * params.blockage_length
    )
    return out if out.ndim else float(out)


def los_probability(r, theta, params: NetworkParams):
    """Probability that the link at (r, theta) sees no blockage."""
    out = np.exp(-np.asarray(expected_blockage_count(r, theta, params)))
    return out if out.ndim else float(out)


def nlos_probability(r, theta, params: NetworkParams):
    out = 1.0 - np.asarray(los_probability(r, theta, params))
    return out if out.ndim else float(out)


def realized_path_loss(r: float, kind: LinkKind, params: NetworkParams) -> LinkState:
    """Path loss r^-alpha for the given link state; r = 0 is out of domain."""
    if not r > 0.0:
        raise DomainError(f"path loss is singular at r = {r}")
    exponent = params.alpha_los if kind is LinkKind.LOS else params.alpha_nlos
    return LinkState(kind, exponent, float(r) ** (-exponent))


# --- modified Bessel function of the first kind, order zero ----------------

_I0_SWITCH = 15.0


def _i0_series(x):
    # sum_k (x/2)^(2k) / (k!)^2; all terms positive, no cancellation
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 80):
        term = term * q / (k * k)
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total

def _i0_asymptotic(x):
    # e^x/sqrt(2 pi x) * sum_k a_k / x^k, truncated at the smallest term
    inv = 1.0 / x
    term = np.ones_like(x)
    total = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    for k in range(1, 30):
        term = term * ((2 * k - 1) ** 2) * inv / (8.0 * k)
        grew = np.abs(term) >= prev
        if np.all(grew):
            break
        total = total + np.where(grew, 0.0, term)
        prev = np.abs(term)
    with np.errstate(over="ignore"):
        return np.exp(x) / np.sqrt(TAU * x) * total


def bessel_i0(x):
    """I0(x) to relative accuracy better than 1e-12.

    Power series up to |x| = 15, asymptotic expansion beyond. Overflows to
    inf around |x| ~ 709 like exp.
    """
    x_in = np.asarray(x, dtype=float)
    x_arr = np.abs(np.atleast_1d(x_in))
    out = np.empty_like(x_arr)
    small = x_arr <= _I0_SWITCH
    if np.any(small):
        out[small] = _i0_series(x_arr[small])
    if np.any(~small):
        out[~small] = _i0_asymptotic(x_arr[~small])
    return float(out[0]) if x_in.ndim == 0 else out.reshape(x_in.shape)


# --- azimuth integral of the LoS probability --------------------------------

_Q_SPEC = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-11, max_evals=200_000)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(21)


def los_azimuth_integral_values(r, params: NetworkParams) -> np.ndarray:
    """Fixed-rule evaluation of the azimuth integral for a batch of radii.

    Composite Gauss-Legendre on one quadrant with the panel count tied to the
    largest exponent in the batch, so the sharpening integrand stays resolved
    as r grows; radii whose integral underflows are returned as exact zeros.
    The radial integrands of the coverage analysis call this in their inner
    loop; it agrees with the adaptive ``los_azimuth_integral`` to ~1e-12.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0.0):
        raise ParameterError("distance must be nonnegative")
    lc = params.blockage_intensity
    a = lc * r * params.blockage_length
    b = lc * r * params.blockage_width
    wl = lc * params.blockage_width * params.blockage_length
    out = np.zeros(r.size)
    # exponent floor over the quadrant is wl + min(a, b); below double-precision
    alive = (np.minimum(a, b) + wl) < 700.0
    if not np.any(alive):
        return out
    aa, bb = a[alive], b[alive]
    panels = int(min(96, max(2, math.ceil(float(np.max(aa + bb)) / 12.0))))
    edges = np.linspace(0.0, math.pi / 2.0, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mids = 0.5 * (edges[:-1] + edges[1:])
    theta = (mids[:, None] + half * _GL_X[None, :]).ravel()
    weights = np.tile(half * _GL_W, panels)
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    with np.errstate(under="ignore"):
        kernel = np.exp(
            -(np.multiply.outer(aa, sin_t) + np.multiply.outer(bb, cos_t) + wl)
        )
    out[alive] = 4.0 * kernel @ weights
    return out


def los_azimuth_integral_many(r, params: NetworkParams) -> np.ndarray:
    """Azimuth integral of los_probability for a batch of distances.

    |sin| and |cos| repeat per quadrant, so one quadrant is integrated and
    multiplied by four; the result does not depend on the orientation mark.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0.0):
        raise ParameterError("distance must be nonnegative")
    lc = params.blockage_intensity
    a = lc * r * params.blockage_length
    b = lc * r * params.blockage_width
    wl = lc * params.blockage_width * params.blockage_length

    def integrand(theta):
        return np.exp(
            -(np.multiply.outer(np.sin(theta), a) + np.multiply.outer(np.cos(theta), b) + wl)
        )

    res = integrate_finite(integrand, 0.0, math.pi / 2.0, _Q_SPEC)
    return 4.0 * np.atleast_1d(res.value)


def los_azimuth_integral(r: float, params: NetworkParams) -> float:
    """Integral over [0, 2pi) of the LoS probability at distance r."""
    return float(los_azimuth_integral_many(float(r), params)[0])


def los_azimuth_integral_bound(r, params: NetworkParams):
    """Closed-form upper bound 2 pi e^(-lc W L) I0(lc r sqrt(L^2 + W^2)).

    Tight at r = 0 and increasingly loose (eventually unbounded) as r grows,
    because I0 grows exponentially while the true integral decays.
    """
    lc = params.blockage_intensity
    diag = math.hypot(params.blockage_length, params.blockage_width)
    x = lc * np.asarray(r, dtype=float) * diag
    out = TAU * math.exp(-lc * params.blockage_width * params.blockage_length) * np.asarray(
        bessel_i0(x)
    )
    return out if out.ndim else float(out)


def mean_los_probability(r, params: NetworkParams):
    """LoS probability averaged over azimuth at fixed distance."""
    out = los_azimuth_integral_many(r, params) / TAU
    return float(out[0]) if np.asarray(r).ndim == 0 else out
