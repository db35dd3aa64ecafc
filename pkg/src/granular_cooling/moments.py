"""Velocity moments: Povzner constants, bounding moment systems, thresholds.

Moments are ``m_p = int f |v|**(2p) dv`` at unit mass, so ``m_0 = 1`` and
``m_1`` is the granular temperature ``E``.

The ODE systems here are comparison systems. ``integrate_meanfield_energy``
solves ``dE/dt = -Psi(E)``, whose solution lies above the true energy.
``integrate_moment_hierarchy`` integrates the Povzner inequalities as
equalities; its output bounds the moments and is not the true dynamics.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import binom, gammaln

from . import quadrature
from .dissipation import psi
from .errors import DomainError, NumericError
from .restitution import describe
from .timeseries import TimeSeries, moment_column

RTOL = 1e-9
ATOL = 1e-12


@dataclass
class MomentVector:
    """Moments ``m_p`` at one time for a set of half-integer orders ``p``."""

    entries: dict
    time: float = 0.0

    def __post_init__(self):
        self.entries = {float(p): float(v) for p, v in self.entries.items()}
        self.entries.setdefault(0.0, 1.0)

    @property
    def orders(self):
        return sorted(self.entries)

    def validate(self):
        """Raise :class:`DomainError` unless the vector is a unit-mass moment set."""
        if abs(self.entries[0.0] - 1.0) > 1e-12:
            raise DomainError(f"moment vectors must have unit mass, got m_0={self.entries[0.0]}")
        for p, v in self.entries.items():
            if p > 0 and not (v > 0 and math.isfinite(v)):
                raise DomainError(f"m_{p:g} must be positive and finite, got {v}")
        return self

    def __getitem__(self, p):
        return self.value(p)

    def value(self, q):
        """Moment of order ``q``; unstored orders are filled in.

        Between stored orders the log-convex (Hoelder) interpolant is used,
        which bounds the true moment from above. Beyond the largest stored
        order the Jensen bound ``m_q >= m_p**(q/p)`` is used, a lower bound.
        """
        q = float(q)
        if q < 0:
            raise DomainError(f"moment order must be non-negative, got {q}")
        if q in self.entries:
            return self.entries[q]
        orders = self.orders
        if q > orders[-1]:
            p = orders[-1]
            return self.entries[p] ** (q / p)
        hi = next(p for p in orders if p > q)
        lo = max(p for p in orders if p < q)
        w = (q - lo) / (hi - lo)
        return self.entries[lo] ** (1.0 - w) * self.entries[hi] ** w

    def jensen_ok(self, rtol=1e-12):
        """``m_{p+1/2} >= m_p**(1 + 1/(2p))`` for consecutive stored orders."""
        orders = [p for p in self.orders if p > 0]
        for p in orders:
            q = p + 0.5
            if q in self.entries and self.entries[q] < self.entries[p] ** (1.0 + 0.5 / p) * (1.0 - rtol):
                return False
        return True

    def log_convex_ok(self, rtol=1e-12):
        """Hoelder interpolation bound over every stored triple."""
        orders = self.orders
        logs = {p: math.log(self.entries[p]) for p in orders if self.entries[p] > 0}
        for i, p in enumerate(orders):
            for j in range(i + 1, len(orders)):
                for k in range(j + 1, len(orders)):
                    q, r = orders[j], orders[k]
                    if not {p, q, r} <= logs.keys():
                        continue
                    bound = ((r - q) * logs[p] + (q - p) * logs[r]) / (r - p)
                    if logs[q] > bound + rtol * max(1.0, abs(bound)):
                        return False
        return True


def gaussian_moments(theta, orders):
    """Moments of the centred Maxwellian with temperature ``theta`` per component.

    ``m_p = (2 theta)**p Gamma(p + 3/2) / Gamma(3/2)``.
    """
    return MomentVector(
        {p: math.exp(p * math.log(2.0 * theta) + gammaln(p + 1.5) - gammaln(1.5)) for p in orders}
    )


def kappa(p):
    """Povzner constant ``kappa_p = int_0^1 ((3+t)/4)**p + ((1-t)/4)**p dt``.

    Closed form ``4/(p+1) [1 - (3/4)**(p+1) + (1/4)**(p+1)]``.
    """
    if not p >= 1:
        raise DomainError(f"kappa_p is defined for p >= 1, got {p}")
    return 4.0 / (p + 1.0) * (1.0 - 0.75 ** (p + 1.0) + 0.25 ** (p + 1.0))


def kappa_quadrature(p):
    """Same constant by direct quadrature of the defining integral."""
    if not p >= 1:
        raise DomainError(f"kappa_p is defined for p >= 1, got {p}")
    return quadrature.integrate(lambda t: ((3.0 + t) / 4.0) ** p + ((1.0 - t) / 4.0) ** p, 0.0, 1.0, 1e-15, 1e-15)


def povzner_sum(mv, p):
    """``S_p = sum_{k=1}^{[(p+1)/2]} C(p,k) (m_{k+1/2} m_{p-k} + m_k m_{p-k+1/2})``."""
    total = 0.0
    for k in range(1, int(math.floor((p + 1.0) / 2.0)) + 1):
        if p - k < 0:
            raise RuntimeError(f"negative moment index {p - k} in S_{p}")
        total += binom(p, k) * (mv[k + 0.5] * mv[p - k] + mv[k] * mv[p - k + 0.5])
    return total


def sink_lower_bound(mv, p):
    """Largest available lower bound on ``m_{p+1/2}`` from ``m_p`` and ``m_{p-1/2}``.

    Jensen gives ``m_p**(1 + 1/(2p))`` at unit mass; log-convexity gives
    ``m_p**2 / m_{p-1/2}``.
    """
    m_p = mv[p]
    return max(m_p ** (1.0 + 0.5 / p), m_p * m_p / mv[p - 0.5])


def povzner_rhs(mv, p, sink=None):
    """Upper bound ``-(1 - kappa_p) m_{p+1/2} + kappa_p S_p`` on ``dm_p/dt``.

    ``sink`` replaces ``m_{p+1/2}`` in the negative term; any lower bound
    on that moment keeps the inequality valid.
    """
    kp = kappa(p)
    top = mv[p + 0.5] if sink is None else sink
    return -(1.0 - kp) * top + kp * povzner_sum(mv, p)


def _time_grid(t_end, per_decade, t_min):
    n = max(2, int(math.ceil(per_decade * (math.log10(t_end) - math.log10(t_min)))) + 1)
    return np.concatenate(([0.0], np.logspace(math.log10(t_min), math.log10(t_end), n)))


def integrate_meanfield_energy(model, E0, t_end, per_decade=64, t_min=1e-3, t_eval=None):
    """Integrate ``dE/dt = -Psi(E)`` from ``E(0) = E0``.

    The state is ``log E`` as a function of ``s = log(1 + t)``, integrated
    with an embedded Runge-Kutta 5(4) pair. Returns a :class:`TimeSeries`
    with columns ``t`` and ``E``.
    """
    if not E0 > 0:
        raise DomainError(f"initial energy must be positive, got {E0}")
    if not t_end > 0:
        raise DomainError(f"t_end must be positive, got {t_end}")
    times = _time_grid(t_end, per_decade, min(t_min, t_end)) if t_eval is None else np.asarray(t_eval, float)

    def rhs(s, y):
        E = math.exp(y[0])
        return [-math.exp(s) * psi(model, E) / E]

    s_eval = np.log1p(times)
    sol = solve_ivp(
        rhs,
        (0.0, float(s_eval[-1])),
        [math.log(E0)],
        method="RK45",
        t_eval=s_eval,
        rtol=RTOL,
        atol=ATOL,
    )
    if not sol.success:
        raise NumericError(f"mean-field integration failed: {sol.message}")
    meta = {"model": describe(model), "kind": "meanfield", "bound": "upper envelope of E(t)"}
    return TimeSeries.from_arrays({"t": times, "E": np.exp(sol.y[0])}, meta)


def meanfield_constant_exact(e0, E0, t):
    """Closed-form solution of the mean-field energy law for constant ``e0``."""
    t = np.asarray(t, dtype=float)
    return E0 / (1.0 + (1.0 - e0**2) / 16.0 * math.sqrt(E0) * t) ** 2


def integrate_moment_hierarchy(model, mv0, p_max, t_end, per_decade=32, t_min=1e-3):
    """Integrate the Povzner comparison system for ``p = 1, 3/2, ..., p_max``.

    ``m_1`` follows the mean-field energy law of the model. Every higher
    order follows ``dm_p/dt = povzner_rhs(p)`` where the sink term uses
    :func:`sink_lower_bound` (which contains the Jensen closure) and
    ``m_{1/2}`` comes from the log-convex interpolant. Each equation then
    involves only orders up to ``p``, so every component is an upper bound
    on the corresponding true moment. Returns a :class:`TimeSeries` with one
    column per order; its metadata marks the result as an upper bound only.
    """
    mv0 = MomentVector(dict(mv0.entries), mv0.time).validate()
    if p_max < 1.5:
        raise DomainError(f"p_max must be at least 3/2, got {p_max}")
    orders = [1.0 + 0.5 * i for i in range(int(round(2 * (p_max - 1.0))) + 1)]
    y0 = [math.log(mv0[p]) for p in orders]
    times = _time_grid(t_end, per_decade, min(t_min, t_end))

    def rhs(s, y):
        vals = np.exp(y)
        mv = MomentVector(dict(zip(orders, vals)))
        dt_ds = math.exp(s)
        out = [-psi(model, vals[0]) / vals[0] * dt_ds]
        for p, m in zip(orders[1:], vals[1:]):
            out.append(povzner_rhs(mv, p, sink=sink_lower_bound(mv, p)) / m * dt_ds)
        return out

    s_eval = np.log1p(times)
    sol = solve_ivp(rhs, (0.0, float(s_eval[-1])), y0, method="RK45", t_eval=s_eval, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise NumericError(f"moment hierarchy integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NumericError("moment closure produced a non-finite value")
    data = {"t": times}
    for p, row in zip(orders, sol.y):
        data[moment_column(p)] = np.exp(row)
    meta = {"model": describe(model), "kind": "moment_hierarchy", "bound": "upper bound only"}
    return TimeSeries.from_arrays(data, meta)


@dataclass
class ThresholdReport:
    """Weak-inelasticity thresholds.

    ``critical_e`` is the smallest constant restitution for which the
    ``m_{3/2}`` bound closes. The remaining fields are only filled for the
    variable-restitution threshold ``ell0``.
    """

    kappa_32: float
    critical_e: float
    alpha: float
    c_gamma: float | None = None
    K0: float | None = None
    K: float | None = None
    ell0: float | None = None
    capped: bool = False
    inputs: dict = field(default_factory=dict)

    def rows(self):
        out = [("kappa_3/2", self.kappa_32), ("critical_e", self.critical_e), ("alpha", self.alpha)]
        for name in ("c_gamma", "K0", "K", "ell0"):
            value = getattr(self, name)
            if value is not None:
                out.append((name, value))
        return out


def satisfies_small_inelasticity(e0):
    """``3 (1 - e0**2) / 8 < 1 - kappa_{3/2}``."""
    return 3.0 * (1.0 - e0**2) / 8.0 < 1.0 - kappa(1.5)


def constant_threshold():
    k = kappa(1.5)
    return ThresholdReport(kappa_32=k, critical_e=math.sqrt(8.0 * k / 3.0 - 5.0 / 3.0), alpha=(1.0 - k) / 2.0)


def ell0_threshold(gamma, A, rho_t0, cap=8.0):
    """Admissible bound ``ell0`` on ``ell_gamma(e)`` for variable restitution.

    Parameters
    ----------
    gamma : float
        Small-speed exponent of ``1 - e``.
    A : float
        Uniform bound on ``m_{2 gamma}**(1/3)`` after the initial layer.
    rho_t0 : float
        Ratio ``m_{3/2} / E**(3/2)`` at the starting time.
    cap : float
        Upper limit imposed on the returned threshold.
    """
    for name, value in (("gamma", gamma), ("A", A), ("rho_t0", rho_t0)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be positive and finite, got {value}")
    base = constant_threshold()
    alpha = base.alpha
    c_gamma = 2.0 ** (3.0 + gamma) / (4.0 + gamma)
    b = 1.0 + 3.0 * c_gamma
    # positive root of -alpha X^2 + b X + 1 = 0
    K0 = (b + math.sqrt(b * b + 4.0 * alpha)) / (2.0 * alpha)
    K = max(K0, rho_t0)
    ell0 = 8.0 * alpha / (9.0 * A * c_gamma * K)
    return ThresholdReport(
        kappa_32=base.kappa_32,
        critical_e=base.critical_e,
        alpha=alpha,
        c_gamma=c_gamma,
        K0=K0,
        K=K,
        ell0=min(ell0, cap),
        capped=ell0 > cap,
        inputs={"gamma": gamma, "A": A, "rho_t0": rho_t0},
    )
