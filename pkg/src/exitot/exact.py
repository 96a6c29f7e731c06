"""Closed forms and series: disc/strip exit-time spectral functions and
quantiles, scaled-domain transport costs, supremal/independent disc costs,
the overlapping-strip double series and its coupling transition threshold,
Brownian norms, and repulsion.

These are the oracles every Monte Carlo estimate is checked against.

Normalization: standard planar Brownian motion with independent coordinates
of variance t each, fixed by the martingale |Z_t|^2 - 2t. Under it the unit
disc has mean exit time 1/2 and all series carry generator-(1/2)Laplacian
rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bessel import j0_zeros, j1

__all__ = [
    "TruncationError",
    "BracketError",
    "QuadratureError",
    "SeriesConfig",
    "QuantileTable",
    "Moments",
    "StripSpec",
    "ThresholdResult",
    "disc_survival",
    "build_disc_quantile",
    "default_disc_quantile",
    "strip_survival",
    "strip_quantile_table",
    "strip_min_expectation",
    "F",
    "coupling_threshold",
    "lambda_scaled",
    "scaling_cost_is_exact",
    "tsame2_scaled",
    "tind2_scaled_disc",
    "same_vs_ind_gap2",
    "phi_disc",
    "tind_disc",
    "repulsion_disc",
    "brownian_norm2",
    "elliptic_annulus_norm2",
    "asymptotic_b0",
    "asymptotic_b0_terms",
    "disc_moments",
    "moments_from_sample",
]


class TruncationError(ValueError):
    """Evaluated series remainder bound exceeds the configured tolerance."""


class BracketError(ValueError):
    """Root bracket carries no sign change (series config too coarse)."""


class QuadratureError(ValueError):
    """Refining the quadrature grid moved the result more than allowed."""


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation control: n_terms is K for single series and M per axis for
    the double series; every evaluation checks a computable remainder bound
    against tail_tol."""

    n_terms: int = 400
    tail_tol: float = 1e-4


_DEFAULT = SeriesConfig()


def _cfg(cfg) -> SeriesConfig:
    return _DEFAULT if cfg is None else cfg


# ---------------------------------------------------------------------------
# Disc exit-time survival: Dirichlet eigenseries with Bessel zeros
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _disc_coeffs(k: int):
    """First k+1 zeros of J0 and coefficients c_n = 2/(j_n J1(j_n)).

    The coefficients alternate in sign with decreasing magnitude, which the
    Leibniz remainder bound relies on; both facts are asserted here.
    """
    z = j0_zeros(k + 1)
    c = 2.0 / (z * np.array([j1(x) for x in z]))
    signs = np.sign(c)
    if not np.all(signs == (-1.0) ** np.arange(len(c))):
        raise ArithmeticError("disc series coefficients failed to alternate")
    if not np.all(np.diff(np.abs(c)) < 0):
        raise ArithmeticError("disc series coefficients failed to decrease")
    return z, c


def _disc_survival_many(ts: np.ndarray, k: int) -> np.ndarray:
    z, c = _disc_coeffs(k)
    ex = np.exp(-0.5 * np.outer(np.asarray(ts, dtype=float), z[:k] ** 2))
    return np.clip(ex @ c[:k], 0.0, 1.0)


def _disc_tail_bound(t: float, k: int) -> float:
    z, c = _disc_coeffs(k)
    return abs(c[k]) * math.exp(-0.5 * z[k] ** 2 * t)


def disc_survival(t: float, cfg: SeriesConfig | None = None) -> float:
    """P(tau_D > t) for the unit disc from the origin; exact 1 at t = 0."""
    cfg = _cfg(cfg)
    if t < 0 or not math.isfinite(t):
        raise ValueError("t must be finite and >= 0")
    if t == 0.0:
        return 1.0
    if _disc_tail_bound(t, cfg.n_terms) > cfg.tail_tol:
        raise TruncationError(
            f"disc survival remainder bound exceeds {cfg.tail_tol:g} at t={t:g};"
            " increase n_terms"
        )
    return float(_disc_survival_many(np.array([t]), cfg.n_terms)[0])


# ---------------------------------------------------------------------------
# Quantile tables
# ---------------------------------------------------------------------------

_CLIP = 1e-4  # probability clip delta; tail cells handled analytically


@dataclass(frozen=True)
class QuantileTable:
    """Monotone grid approximation of an exit-time quantile function.

    Probabilities are G+1 equally spaced values on [delta, 1-delta]; the two
    clipped tail cells are integrated with the leading exponential term of
    the survival series (log rate `tail_log_rate`).
    """

    probabilities: np.ndarray
    values: np.ndarray
    tail_log_rate: float
    bessel_zeros: np.ndarray | None = None

    @property
    def delta(self) -> float:
        return float(self.probabilities[0])

    def interp(self, r) -> np.ndarray:
        return np.interp(r, self.probabilities, self.values)

    def _trap_weights(self) -> np.ndarray:
        step = self.probabilities[1] - self.probabilities[0]
        w = np.full(len(self.probabilities), step)
        w[0] = w[-1] = 0.5 * step
        return w

    def _top_value(self) -> float:
        # Representative quantile for the clipped upper cell [1-delta, 1).
        return float(self.values[-1]) + self.tail_log_rate

    def integral(self) -> float:
        """Quadrature estimate of the full integral of Q over (0, 1)."""
        core = float(self._trap_weights() @ self.values)
        return core + self.delta * float(self.values[0]) + self.delta * self._top_value()

    def integral_power(self, q: float) -> float:
        core = float(self._trap_weights() @ self.values**q)
        return core + self.delta * float(self.values[0]) ** q + self.delta * self._top_value() ** q

    def antimonotone_integral(self, lam2: float, q: float) -> float:
        """Integral over r of |Q(r) - lam2*Q(1-r)|^q (countermonotone pairing)."""
        f = np.abs(self.values - lam2 * self.values[::-1]) ** q
        core = float(self._trap_weights() @ f)
        lo = abs(float(self.values[0]) - lam2 * self._top_value()) ** q
        hi = abs(self._top_value() - lam2 * float(self.values[0])) ** q
        return core + self.delta * lo + self.delta * hi

    def _double_weights(self) -> np.ndarray:
        w = self._trap_weights()
        w[0] += self.delta
        w[-1] += self.delta
        return w

    def cross_integral_abs(self, lam2: float, q: float) -> float:
        """Double integral of |Q(r) - lam2*Q(u)|^q over the unit square."""
        w = self._double_weights()
        f = np.abs(self.values[:, None] - lam2 * self.values[None, :]) ** q
        return float(w @ f @ w)

    def cross_integral_min(self, lam2: float) -> float:
        """Double integral of min(Q(r), lam2*Q(u)): E(theta ^ lam2*theta')."""
        w = self._double_weights()
        f = np.minimum(self.values[:, None], lam2 * self.values[None, :])
        return float(w @ f @ w)

    def to_csv_rows(self):
        for r, qv in zip(self.probabilities, self.values):
            yield (float(r), float(qv))


def _invert_survival(surv_many, targets: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray:
    s_lo = surv_many(np.array([t_lo]))[0]
    s_hi = surv_many(np.array([t_hi]))[0]
    if not (s_lo >= targets.max() and s_hi <= targets.min()):
        raise BracketError(
            f"survival bracket [{t_lo:g}, {t_hi:g}] does not enclose all targets"
        )
    lo = np.full(targets.shape, t_lo)
    hi = np.full(targets.shape, t_hi)
    for _ in range(52):
        mid = 0.5 * (lo + hi)
        above = surv_many(mid) > targets
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def build_disc_quantile(g: int = 2000, cfg: SeriesConfig | None = None) -> QuantileTable:
    """Quantile table of tau_D by bisecting the spectral survival series."""
    cfg = _cfg(cfg)
    if g < 100:
        raise ValueError("need g >= 100 grid cells")
    z, _ = _disc_coeffs(cfg.n_terms)
    rs = np.linspace(_CLIP, 1.0 - _CLIP, g + 1)
    qs = _invert_survival(
        lambda ts: _disc_survival_many(ts, cfg.n_terms), 1.0 - rs, 2e-4, 80.0
    )
    if not np.all(np.diff(qs) > 0):
        raise ArithmeticError("disc quantile table is not strictly increasing")
    return QuantileTable(
        probabilities=rs,
        values=qs,
        tail_log_rate=2.0 / z[0] ** 2,
        bessel_zeros=z[: cfg.n_terms].copy(),
    )


@lru_cache(maxsize=2)
def default_disc_quantile(g: int = 2000) -> QuantileTable:
    return build_disc_quantile(g)


# ---------------------------------------------------------------------------
# Overlapping strips: survival series, E(theta ^ theta'), F, threshold
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripSpec:
    """Strip {-eps < Re z < L} paired with its y-axis reflection.

    Derived quantities are exact by construction: ell = L + eps,
    alpha = eps/ell, rho = L/eps >= 1.
    """

    eps: float
    L: float

    def __post_init__(self):
        if not (self.eps > 0 and self.L > 0):
            raise ValueError("eps and L must be positive")
        if self.L < self.eps:
            raise ValueError("need L >= eps (rho >= 1); swap the strips")

    @property
    def ell(self) -> float:
        return self.L + self.eps

    @property
    def alpha(self) -> float:
        return self.eps / (self.L + self.eps)

    @property
    def rho(self) -> float:
        return self.L / self.eps

    @classmethod
    def from_offset(cls, ell: float, a: float) -> "StripSpec":
        """Width-ell strip translated by a >= 0 against its reflection."""
        if not (0 <= a < ell / 2):
            raise ValueError("need 0 <= a < ell/2 for overlapping strips")
        return cls(eps=ell / 2 - a, L=ell / 2 + a)


def _strip_survival_many(ts: np.ndarray, s: StripSpec, k_terms: int) -> np.ndarray:
    k = 2.0 * np.arange(k_terms) + 1.0
    coef = (4.0 / math.pi) * np.sin(k * math.pi * s.alpha) / k
    rate = 0.5 * (k * math.pi / s.ell) ** 2
    ex = np.exp(-np.outer(np.asarray(ts, dtype=float), rate))
    return np.clip(ex @ coef, 0.0, 1.0)


def _strip_tail_bound(t: float, s: StripSpec, k_terms: int) -> float:
    # Abel bound: partial sums of sin((2n+1)pi alpha) are bounded by
    # 1/sin(pi alpha) and the coefficients decrease, so the remainder is
    # controlled by the first omitted coefficient.
    k_next = 2.0 * k_terms + 1.0
    ex = math.exp(-0.5 * (k_next * math.pi / s.ell) ** 2 * t)
    return (4.0 / math.pi) * ex / (k_next * math.sin(math.pi * s.alpha))


def strip_survival(t: float, s: StripSpec, cfg: SeriesConfig | None = None) -> float:
    """P(theta > t) for the strip exit time, truncated reflection series."""
    cfg = _cfg(cfg)
    if t < 0 or not math.isfinite(t):
        raise ValueError("t must be finite and >= 0")
    if _strip_tail_bound(t, s, cfg.n_terms) > cfg.tail_tol:
        raise TruncationError(
            f"strip survival remainder bound exceeds {cfg.tail_tol:g} at t={t:g};"
            " small t needs larger n_terms"
        )
    return float(_strip_survival_many(np.array([t]), s, cfg.n_terms)[0])


def _strip_terms_needed(t_min: float, s: StripSpec, tol: float) -> int:
    """Smallest K with the Abel remainder below tol for every t >= t_min."""
    sin_a = math.sin(math.pi * s.alpha)
    budget = math.log(4.0 / (math.pi * tol * sin_a))
    k = s.ell / math.pi * math.sqrt(max(2.0 * budget, 1.0) / t_min)
    k_terms = int(k // 2) + 2
    if k_terms > 200_000:
        raise TruncationError("strip survival needs too many terms at this t")
    return k_terms


@lru_cache(maxsize=32)
def _strip_table_cached(eps: float, L: float, g: int, tol: float) -> QuantileTable:
    s = StripSpec(eps, L)
    rs = np.linspace(_CLIP, 1.0 - _CLIP, g + 1)
    t_lo = 1e-5 * s.eps**2
    t_hi = 2.0 * s.ell**2 / math.pi**2 * math.log(4e4 / math.sin(math.pi * s.alpha))
    k_terms = _strip_terms_needed(t_lo, s, tol)
    qs = _invert_survival(
        lambda ts: _strip_survival_many(ts, s, k_terms), 1.0 - rs, t_lo, t_hi
    )
    if not np.all(np.diff(qs) > 0):
        raise ArithmeticError("strip quantile table is not strictly increasing")
    return QuantileTable(
        probabilities=rs,
        values=qs,
        tail_log_rate=2.0 * s.ell**2 / math.pi**2,
    )


def strip_quantile_table(s: StripSpec, g: int = 2000, cfg: SeriesConfig | None = None) -> QuantileTable:
    """Quantile table of the strip exit time (inverts the survival series).

    The builder picks the series length adaptively from the smallest bracket
    time, independent of cfg.n_terms; cfg.tail_tol sets the accuracy target.
    """
    cfg = _cfg(cfg)
    return _strip_table_cached(float(s.eps), float(s.L), int(g), float(min(cfg.tail_tol, 1e-6)))


def F(rho: float, cfg: SeriesConfig | None = None) -> float:
    """Dimensionless double series: E(theta ^ theta') / eps^2 for independent
    exit times of overlapping strips with width ratio rho = L/eps."""
    cfg = _cfg(cfg)
    if rho < 1:
        raise ValueError("rho must be >= 1")
    m = cfg.n_terms
    alpha = 1.0 / (rho + 1.0)
    pref = 32.0 * (rho + 1.0) ** 2 / math.pi**4
    k = 2.0 * np.arange(m) + 1.0
    a = np.sin(k * math.pi * alpha) / k
    total = 0.0
    chunk = 4096
    for i in range(0, m, chunk):
        ki = k[i : i + chunk]
        ai = a[i : i + chunk]
        denom = ki[:, None] ** 2 + k[None, :] ** 2
        total += float((ai[:, None] * a[None, :] / denom).sum())
    # Abel remainder: inner sums are positive and decreasing, partial sine
    # sums are bounded by 1/sin(pi alpha).
    k_next = 2.0 * m + 1.0
    bound = pref * (math.pi / 2.0) / (math.sin(math.pi * alpha) * k_next**3)
    if bound > cfg.tail_tol:
        raise TruncationError(
            f"F(rho) remainder bound {bound:g} exceeds {cfg.tail_tol:g}; increase n_terms"
        )
    return pref * total


def strip_min_expectation(s: StripSpec, cfg: SeriesConfig | None = None) -> float:
    """E(theta ^ theta') for independent strip exit times: eps^2 * F(rho)."""
    return s.eps**2 * F(s.rho, cfg)


@dataclass(frozen=True)
class ThresholdResult:
    rho_star: float
    a_star: float
    overlap_width: float


def coupling_threshold(ell: float, tol: float = 1e-6, cfg: SeriesConfig | None = None) -> ThresholdResult:
    """Translation offset where same-path and independent couplings cost the
    same for a width-ell strip against its reflection: F(rho*) = 3."""
    if not (ell > 0 and tol > 0):
        raise ValueError("ell and tol must be positive")
    cfg = _cfg(cfg)
    lo, hi = 2.0, 50.0
    f_lo, f_hi = F(lo, cfg) - 3.0, F(hi, cfg) - 3.0
    if not (f_lo < 0 < f_hi):
        raise BracketError("F - 3 has no sign change on [2, 50]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if F(mid, cfg) - 3.0 < 0:
            lo = mid
        else:
            hi = mid
    rho = 0.5 * (lo + hi)
    a_star = (rho - 1.0) / (rho + 1.0) * (ell / 2.0)
    overlap = 2.0 * ell / (rho + 1.0)
    return ThresholdResult(rho_star=rho, a_star=a_star, overlap_width=overlap)


# ---------------------------------------------------------------------------
# Moments and scaled-domain costs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Moments:
    """Spatial/temporal exit moments of one domain at exponent p."""

    p: float
    a_p: float  # E |Z_tau|^p
    m_p: float  # E tau^{p/2}

    @property
    def s_p(self) -> float:
        return self.a_p + self.m_p


def disc_moments(p: float, qt: QuantileTable) -> Moments:
    """Unit-disc moments: |Z_tau| = 1, temporal moment from the quantile table."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return Moments(p=p, a_p=1.0, m_p=qt.integral_power(p / 2.0))


def moments_from_sample(sample, p: float) -> Moments:
    if p < 1:
        raise ValueError("p must be >= 1")
    if len(sample) == 0:
        raise ValueError("empty sample")
    a = float(np.mean(np.abs(sample.positions) ** p))
    m = float(np.mean(sample.times ** (p / 2.0)))
    return Moments(p=p, a_p=a, m_p=m)


def scaling_cost_is_exact(p: float) -> bool:
    """The diagonal-scaling value is the exact optimum for p >= 2; below it
    is an upper bound only."""
    return p >= 2.0


def lambda_scaled(p: float, lam: float, m: Moments) -> float:
    """Optimal transport cost between a domain and its lam-scaled copy
    (exact for p >= 2, upper bound for 1 <= p < 2)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if lam <= 0:
        raise ValueError("lam must be positive")
    val = abs(lam - 1.0) ** p * m.a_p + abs(lam * lam - 1.0) ** (p / 2.0) * m.m_p
    return val ** (1.0 / p)


def tsame2_scaled(lam: float, m2: float) -> float:
    """Same-path p=2 cost between a starlike domain and its lam-scaled copy."""
    if lam < 1:
        raise ValueError("lam must be >= 1")
    return math.sqrt(3.0 * (lam * lam - 1.0) * m2)


def tind2_scaled_disc(lam: float, qt: QuantileTable) -> float:
    """Independent p=2 cost between the unit disc and its lam-scaled copy."""
    if lam < 1:
        raise ValueError("lam must be >= 1")
    m2 = qt.integral()
    emin = qt.cross_integral_min(lam * lam)
    return math.sqrt(3.0 * (1.0 + lam * lam) * m2 - 2.0 * emin)


def same_vs_ind_gap2(
    etau_u: float, etau_v: float, etau_inter: float, emin_theta_s: float
) -> float:
    """Signed gap of squared p=2 costs, independent minus same-path:
    2*(3*E(tau_{U^V}) - E(theta ^ S)). Positive iff same-path is cheaper."""
    del etau_u, etau_v  # enter the two costs but cancel in the gap
    return 2.0 * (3.0 * etau_inter - emin_theta_s)


# ---------------------------------------------------------------------------
# Disc supremal / independent costs, repulsion, norms
# ---------------------------------------------------------------------------

def _halved(qt: QuantileTable) -> QuantileTable:
    return QuantileTable(
        probabilities=qt.probabilities[::2],
        values=qt.values[::2],
        tail_log_rate=qt.tail_log_rate,
        bessel_zeros=qt.bessel_zeros,
    )


def _resolution_check(full: float, halved: float, what: str) -> None:
    # Second-order quadrature: the halved-vs-full difference is ~4x the shift
    # a further node doubling would produce, and that shift must stay <= 1e-4.
    if abs(full - halved) > 4e-4:
        raise QuadratureError(
            f"{what}: estimated node-doubling shift "
            f"{abs(full - halved) / 4:.2e} exceeds 1e-4"
        )


def phi_disc(p: float, lam: float, qt: QuantileTable) -> float:
    """Supremal cost between the unit disc and its lam-scaled copy: antipodal
    angles with the countermonotone quantile coupling of exit times."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if lam <= 0:
        raise ValueError("lam must be positive")

    def val(table):
        return ((1.0 + lam) ** p + table.antimonotone_integral(lam * lam, p / 2.0)) ** (1.0 / p)

    full = val(qt)
    _resolution_check(full, val(_halved(qt)), "phi_disc")
    return full


def _i_p(p: float, lam: float, nodes: int) -> float:
    th = np.linspace(0.0, 2.0 * math.pi, nodes, endpoint=False)
    return float(np.mean((1.0 + lam * lam - 2.0 * lam * np.cos(th)) ** (p / 2.0)))


def tind_disc(p: float, lam: float, qt: QuantileTable) -> float:
    """Independent-coupling cost between the unit disc and its lam-scaled
    copy: uniform independent angles, independent exit times."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if lam <= 0:
        raise ValueError("lam must be positive")
    i_p = _i_p(p, lam, 2048)
    _resolution_check(i_p ** (1.0 / p), _i_p(p, lam, 4096) ** (1.0 / p), "tind_disc angular term")

    def val(table):
        return (i_p + table.cross_integral_abs(lam * lam, p / 2.0)) ** (1.0 / p)

    full = val(qt)
    _resolution_check(full, val(_halved(qt)), "tind_disc")
    return full


def repulsion_disc(p: float, qt: QuantileTable) -> float:
    """Maximal self-distance of the unit disc's exit-pair law."""
    return phi_disc(p, 1.0, qt)


def brownian_norm2(etau: float) -> float:
    """p=2 Brownian size of a domain: sqrt(3 * E tau)."""
    if etau < 0:
        raise ValueError("mean exit time must be >= 0")
    return math.sqrt(3.0 * etau)


def elliptic_annulus_norm2(c: float, alpha: float, gamma: float, beta: float) -> float:
    """Closed-form p=2 Brownian norm of the shifted confocal elliptic annulus
    with base point on the middle ellipse of parameter gamma."""
    if c <= 0:
        raise ValueError("c must be positive")
    if not (0 < alpha <= gamma <= beta) or alpha == beta:
        raise ValueError("need 0 < alpha <= gamma <= beta with alpha < beta")
    br = (
        (beta - gamma) / (beta - alpha) * math.cosh(2.0 * alpha)
        + (gamma - alpha) / (beta - alpha) * math.cosh(2.0 * beta)
        - math.cosh(2.0 * gamma)
        + (math.sinh(2.0 * (beta - gamma)) + math.sinh(2.0 * (gamma - alpha)))
        / math.sinh(2.0 * (beta - alpha))
        - 1.0
    )
    return math.sqrt(max(0.0, 0.75 * c * c * br))


# ---------------------------------------------------------------------------
# Asymptotic constant of scaled-domain costs
# ---------------------------------------------------------------------------

def _b0_positions(coupled_pairs):
    if isinstance(coupled_pairs, tuple) and len(coupled_pairs) == 2:
        xi, xi2 = coupled_pairs
        return np.asarray(xi, dtype=complex), np.asarray(xi2, dtype=complex)
    xi = np.array([complex(a.position) for a, _ in coupled_pairs])
    xi2 = np.array([complex(b.position) for _, b in coupled_pairs])
    return xi, xi2


def asymptotic_b0_terms(p: float, coupled_pairs, s_p: float) -> np.ndarray:
    """Per-sample contributions to the constant term of the large-dilation
    cost expansion; their mean is the b0 estimate.

    coupled_pairs is either a sequence of (ExitPair, ExitPair) with the
    second component the one that gets dilated, or a tuple of two complex
    position arrays (xi, xi_dilated_base).
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if s_p <= 0:
        raise ValueError("s_p must be positive")
    xi, xi2 = _b0_positions(coupled_pairs)
    if len(xi) == 0:
        raise ValueError("empty sample")
    dot = xi2.real * xi.real + xi2.imag * xi.imag  # Re(xi' * conj(xi))
    return -np.abs(xi2) ** (p - 2.0) * dot / s_p ** ((p - 1.0) / p)


def asymptotic_b0(p: float, coupled_pairs, s_p: float) -> float:
    """Empirical constant term of the large-dilation expansion of a coupled
    transport cost; 0 for independent couplings, -A2/sqrt(S2) for the
    diagonal disc coupling at p=2."""
    return float(np.mean(asymptotic_b0_terms(p, coupled_pairs, s_p)))
