"""Entropy estimation from samples and the moment/entropy inequalities.

Sign convention: ``H_signed`` is ``int f log f``, the negative of the
differential entropy. ``H_abs`` is ``int f |log f|``.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln

from .errors import DomainError

log = logging.getLogger(__name__)

INV_E = math.exp(-1.0)


def sphere_area(n):
    """Surface measure of the unit sphere in ``R^n``."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _log_ball_volume(d):
    return (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0 + 1.0)


@dataclass
class EntropyEstimate:
    H_signed: float
    H_abs: float
    method: str
    stderr: float
    stderr_abs: float = math.nan


def _as_velocities(ensemble):
    v = getattr(ensemble, "velocities", ensemble)
    return np.asarray(v, dtype=float)


def knn_log_density(v, k=5, rng=None):
    """Per-sample log-density surrogate of the Kozachenko-Leonenko estimator.

    ``log f_i = psi(k) - psi(N) - log V_d - d log eps_i`` with ``eps_i``
    the distance to the ``k``-th neighbour. Its mean is ``H_signed``.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    N, d = v.shape
    tree = cKDTree(v)
    dist, _ = tree.query(v, k=k + 1)
    eps = dist[:, k]
    if np.any(eps <= 0):
        E = float(np.mean(np.sum(v * v, axis=1)))
        amp = 1e-12 * math.sqrt(E) if E > 0 else 1e-12
        n_tied = int(np.sum(eps <= 0))
        log.warning("%d samples with tied neighbours; jittering at amplitude %.3g", n_tied, amp)
        rng = np.random.default_rng(0) if rng is None else rng
        v = v + amp * rng.standard_normal(v.shape)
        dist, _ = cKDTree(v).query(v, k=k + 1)
        eps = dist[:, k]
    return digamma(k) - digamma(N) - _log_ball_volume(d) - d * np.log(eps)


def entropy_knn(ensemble, k=5, n_boot=16, rng=None):
    """Kozachenko-Leonenko estimate of ``H_signed`` and ``H_abs``.

    The standard errors come from ``n_boot`` bootstrap resamples of the
    per-sample log-density terms, drawn from ``rng``.
    """
    v = _as_velocities(ensemble)
    if k < 3:
        raise DomainError(f"k must be at least 3, got {k}")
    if v.shape[0] < 10 * k:
        raise DomainError(f"need at least {10 * k} samples for k={k}, got {v.shape[0]}")
    rng = np.random.default_rng(0) if rng is None else rng
    logf = knn_log_density(v, k, rng)
    absf = np.abs(logf)
    N = logf.size
    signed_boot = np.empty(n_boot)
    abs_boot = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, N, size=N)
        signed_boot[b] = logf[idx].mean()
        abs_boot[b] = absf[idx].mean()
    return EntropyEstimate(
        H_signed=float(logf.mean()),
        H_abs=float(absf.mean()),
        method=f"knn({k})",
        stderr=float(signed_boot.std(ddof=1)),
        stderr_abs=float(abs_boot.std(ddof=1)),
    )


def lambert_w(x):
    """Principal branch ``W_0`` of the Lambert function, ``W e^W = x``."""
    if np.ndim(x) > 0:
        return np.array([lambert_w(float(y)) for y in np.ravel(x)]).reshape(np.shape(x))
    x = float(x)
    if math.isnan(x) or x < -INV_E:
        # allow the rounding of -1/e itself
        if not (x >= -INV_E * (1 + 1e-15)):
            raise DomainError(f"lambert_w needs x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x <= -INV_E:
        return -1.0
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif x < 3.0:
        w = math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    else:
        L1 = math.log(x)
        L2 = math.log(L1)
        w = L1 - L2 + L2 / L1
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w_new = w - step
        if w_new == w or abs(step) <= 1e-16 * max(1.0, abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def _check_order(n, k):
    if not (0 < k < n):
        raise DomainError(f"moment order k must lie in (0, {n}), got {k}")


def hbar_J(a, n, k):
    """``J_{n,k}(a) = |S^{n-1}| / k * (2/a)**(n/k) * Gamma(n/k)``."""
    return sphere_area(n) / k * (2.0 / a) ** (n / k) * math.gamma(n / k)


def hbar_objective(log_a, H_signed, M_k, n, k):
    a = math.exp(log_a)
    return H_signed + 2.0 * a * M_k + 2.0 * hbar_J(a, n, k)


def golden_section(func, lo, hi, tol=1e-10, max_iter=500):
    """Minimise a unimodal function on ``[lo, hi]``; returns ``(x, f(x))``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = func(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = func(d)
    x = 0.5 * (lo + hi)
    return x, func(x)


def hbar_bound(H_signed, M_k, n, k, return_argmin=False):
    """Upper bound on ``H_abs`` from ``H_signed`` and the ``k``-th moment.

    Minimises ``H + 2 a M_k + 2 J_{n,k}(a)`` over ``a > 0`` by
    golden-section search in ``log a``. The objective is convex in ``log a``.
    """
    _check_order(n, k)
    if not M_k > 0:
        raise DomainError(f"M_k must be positive, got {M_k}")
    # J = C a**(-n/k), so the minimiser is a* = (C n / (M k))**(k/(n+k))
    C = sphere_area(n) / k * 2.0 ** (n / k) * math.gamma(n / k)
    guess = (k / (n + k)) * math.log(C * n / (M_k * k))
    lo, hi = guess - 20.0, guess + 20.0
    x, val = golden_section(lambda s: hbar_objective(s, H_signed, M_k, n, k), lo, hi, tol=1e-10)
    return (val, math.exp(x)) if return_argmin else val


def moment_lower_bound_constant(n, k, eps):
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    return eps * (n * (1.0 - eps) / sphere_area(n)) ** (k / n)


def moment_lower_bound(H_abs, n, k, eps):
    """Lower bound ``C(n,k,eps) exp(-k H_abs / (n (1 - eps)))`` on ``M_k``."""
    C = moment_lower_bound_constant(n, k, eps)
    return C * math.exp(-k * H_abs / (n * (1.0 - eps)))


# ---------------------------------------------------------------------------
# analytic test families

@dataclass
class UniformBall:
    R: float

    @property
    def name(self):
        return f"UniformBall(R={self.R:.6g})"

    def moment(self, k):
        return 3.0 * self.R**k / (k + 3.0)

    def entropies(self):
        H = -math.log(4.0 * math.pi * self.R**3 / 3.0)
        return H, abs(H)


@dataclass
class Maxwellian:
    theta: float

    @property
    def name(self):
        return f"Maxwellian(theta={self.theta:.6g})"

    def moment(self, k):
        return (2.0 * self.theta) ** (k / 2.0) * math.gamma((k + 3.0) / 2.0) / math.gamma(1.5)

    def entropies(self):
        from . import quadrature

        th = self.theta
        H = -1.5 * math.log(2.0 * math.pi * th) - 1.5
        log_f0 = -1.5 * math.log(2.0 * math.pi * th)

        def radial(s, absolute):
            # s = |v| / sqrt(theta); density of s is sqrt(2/pi) s^2 exp(-s^2/2)
            lf = log_f0 - 0.5 * s * s
            w = math.sqrt(2.0 / math.pi) * s * s * np.exp(-0.5 * s * s)
            return w * (np.abs(lf) if absolute else lf)

        breaks = []
        if log_f0 > 0:
            breaks.append(math.sqrt(2.0 * log_f0))
        H_abs = quadrature.integrate(lambda s: radial(s, True), 0.0, 40.0, abs_tol=1e-13, rel_tol=1e-12, breakpoints=breaks)
        return H, H_abs


@dataclass
class GaussianMixture3D:
    """Mixture of 3D Gaussians; expectations by tensor Gauss-Hermite per component."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    nodes: int = 24
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def name(self):
        return f"GaussianMixture3D(components={len(self.weights)})"

    @classmethod
    def random(cls, rng, n_min=2, n_max=5, sigma_range=(0.2, 2.0), spread=3.0):
        m = int(rng.integers(n_min, n_max + 1))
        weights = rng.dirichlet(np.ones(m))
        means = rng.uniform(-spread, spread, size=(m, 3))
        covs = np.empty((m, 3, 3))
        for j in range(m):
            q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            sig = np.exp(rng.uniform(math.log(sigma_range[0]), math.log(sigma_range[1]), size=3))
            covs[j] = q @ np.diag(sig**2) @ q.T
        return cls(weights, means, covs)

    def log_density(self, x):
        x = np.atleast_2d(x)
        terms = []
        for w, mu, cov in zip(self.weights, self.means, self.covs):
            L = np.linalg.cholesky(cov)
            z = np.linalg.solve(L, (x - mu).T).T
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            terms.append(math.log(w) - 0.5 * np.sum(z * z, axis=1) - 0.5 * logdet - 1.5 * math.log(2.0 * math.pi))
        terms = np.array(terms)
        top = terms.max(axis=0)
        return top + np.log(np.sum(np.exp(terms - top), axis=0))

    def _expect(self, func):
        # E_f[g] = sum_j w_j E_{N_j}[g]
        x1, w1 = np.polynomial.hermite_e.hermegauss(self.nodes)
        w1 = w1 / math.sqrt(2.0 * math.pi)
        Z = np.stack(np.meshgrid(x1, x1, x1, indexing="ij"), axis=-1).reshape(-1, 3)
        W = np.einsum("i,j,k->ijk", w1, w1, w1).ravel()
        total = 0.0
        for w, mu, cov in zip(self.weights, self.means, self.covs):
            L = np.linalg.cholesky(cov)
            pts = mu + Z @ L.T
            total += w * float(np.dot(W, func(pts)))
        return total

    def moment(self, k):
        key = ("m", k)
        if key not in self._cache:
            if k == 2:
                self._cache[key] = float(sum(w * (mu @ mu + np.trace(c)) for w, mu, c in zip(self.weights, self.means, self.covs)))
            else:
                self._cache[key] = self._expect(lambda p: np.sum(p * p, axis=1) ** (k / 2.0))
        return self._cache[key]

    def entropies(self):
        if "H" not in self._cache:
            H = self._expect(self.log_density)
            H_abs = self._expect(lambda p: np.abs(self.log_density(p)))
            self._cache["H"] = (H, H_abs)
        return self._cache["H"]


@dataclass
class InequalityReport:
    rows: list
    violations: list

    @property
    def ok(self):
        return not self.violations

    def worst(self, check):
        slacks = [r["slack"] for r in self.rows if r["check"] == check]
        return min(slacks) if slacks else math.nan


def check_inequalities(family, ks=(1, 2), eps_values=(0.25, 0.5, 0.75), n=3, rel_tol=1e-9):
    """Evaluate both inequalities on every member of ``family``.

    Each row carries the relative slack ``(rhs - lhs) / |rhs|`` of an
    inequality ``lhs <= rhs``; a row is a violation when the slack falls
    below ``-rel_tol``, which absorbs quadrature round-off.
    """
    rows, violations = [], []
    for member in family:
        H, H_abs = member.entropies()
        for k in ks:
            bound = hbar_bound(H, member.moment(k), n, k)
            rows.append({"member": member.name, "check": f"hbar_k{k:g}", "lhs": H_abs, "rhs": bound})
        for eps in eps_values:
            for k in ks:
                lower = moment_lower_bound(H_abs, n, k, eps)
                rows.append({"member": member.name, "check": f"moment_k{k:g}_eps{eps:g}", "lhs": lower, "rhs": member.moment(k)})
        rows.append({"member": member.name, "check": "abs_ge_signed", "lhs": abs(H), "rhs": H_abs})
    for row in rows:
        scale = max(abs(row["rhs"]), 1e-300)
        row["slack"] = (row["rhs"] - row["lhs"]) / scale
        if row["slack"] < -rel_tol:
            violations.append(row)
    return InequalityReport(rows, violations)


def standard_family(seed=0, n_mixtures=100, n_balls=20, thetas=(1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3)):
    """The Gaussian-mixture, uniform-ball and Maxwellian members used for verification."""
    rng = np.random.default_rng(seed)
    family = [GaussianMixture3D.random(rng) for _ in range(n_mixtures)]
    family += [UniformBall(float(R)) for R in np.logspace(-3, 3, n_balls)]
    family += [Maxwellian(float(t)) for t in thetas]
    return family
