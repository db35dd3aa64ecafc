"""Cooling-law diagnostics on time series and the experiment matrix.

All fits regress on ``L = log(1 + t)``. Unless a window is given, fits use
the last 60% of the ``L`` range covered by rows with ``t > 0``, which
drops the initial transient.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import csv
import json
import logging
import math
import os

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, NumericError
from .moments import constant_threshold, ell0_threshold, integrate_meanfield_energy
from .restitution import Constant, Viscoelastic, describe, ell_gamma
from .timeseries import moment_column

log = logging.getLogger(__name__)

LATE_FRACTION = 0.6
MIN_FIT_POINTS = 8


def theory_exponent(gamma):
    return -2.0 / (1.0 + gamma)


def late_window(t, fraction=LATE_FRACTION):
    """``(t_lo, t_hi)`` spanning the last ``fraction`` of the ``log(1+t)`` range."""
    t = np.asarray(t, dtype=float)
    pos = t[t > 0]
    if pos.size == 0:
        raise DomainError("series has no rows with t > 0")
    L_lo, L_hi = math.log1p(pos.min()), math.log1p(pos.max())
    L_cut = L_hi - fraction * (L_hi - L_lo)
    return float(math.expm1(L_cut)), float(pos.max())


def _mask(series, window):
    t = series.t
    if window is None:
        window = late_window(t)
    lo, hi = window
    # tolerate the round trip through expm1/log1p at the window edges
    lo_eff = lo * (1.0 - 1e-12)
    hi_eff = hi * (1.0 + 1e-12)
    return (t >= lo_eff) & (t <= hi_eff), (float(lo), float(hi))


def decades_covered(t):
    t = np.asarray(t, dtype=float)
    return math.log10(1.0 + t.max()) - math.log10(1.0 + t.min())


@dataclass
class DecayFit:
    exponent: float
    prefactor: float
    window: tuple
    residual: float
    n_points: int


def fit_decay(series, column="E", window=None):
    """Least-squares power law ``value ~ prefactor * (1+t)**exponent`` over ``window``."""
    mask, window = _mask(series, window)
    n = int(mask.sum())
    if n < MIN_FIT_POINTS:
        raise NumericError(f"decay fit needs at least {MIN_FIT_POINTS} points in the window, got {n}")
    y = series[column][mask]
    if np.any(~(y > 0)):
        raise DomainError(f"column {column!r} must be strictly positive in the fit window")
    L = np.log1p(series.t[mask])
    logy = np.log(y)
    X = np.column_stack([np.ones_like(L), L])
    coef, *_ = np.linalg.lstsq(X, logy, rcond=None)
    resid = logy - X @ coef
    return DecayFit(
        exponent=float(coef[1]),
        prefactor=float(math.exp(coef[0])),
        window=window,
        residual=float(math.sqrt(np.mean(resid**2))),
        n_points=n,
    )


@dataclass
class SandwichResult:
    c_hat: float
    C_hat: float
    ratio: float
    passed: bool
    window: tuple
    decades: float


def check_sandwich(series, gamma, window=None, ratio_bound=10.0):
    """Extremes of ``E(t) (1+t)**(2/(1+gamma))`` over the fit window.

    Passes when both extremes are finite and positive and their ratio is at
    most ``ratio_bound``.
    """
    mask, window = _mask(series, window)
    if not mask.any():
        raise DomainError("empty sandwich window")
    t = series.t[mask]
    scaled = series["E"][mask] * (1.0 + t) ** (2.0 / (1.0 + gamma))
    c_hat, C_hat = float(scaled.min()), float(scaled.max())
    finite = math.isfinite(c_hat) and math.isfinite(C_hat) and c_hat > 0
    ratio = C_hat / c_hat if finite else math.inf
    return SandwichResult(c_hat, C_hat, ratio, bool(finite and ratio <= ratio_bound), window, decades_covered(series.t))


@dataclass
class MomentScaling:
    K_hat: float
    trend: float
    passed: bool
    running_max: np.ndarray = field(repr=False)


def check_moment_scaling(series, p, window=None, growth_limit=0.2):
    """Track ``m_p / E**p`` and test that its running maximum levels off.

    ``trend`` is the relative increase of the running maximum over the last
    decade of ``t``; the check passes when it is at most ``growth_limit``.
    ``K_hat`` is the largest ratio inside the late window.
    """
    col = moment_column(p)
    if col not in series:
        raise DomainError(f"series has no column {col}")
    ratio = series[col] / series["E"] ** p
    run_max = np.maximum.accumulate(ratio)
    t = series.t
    mask, _ = _mask(series, window)
    K_hat = float(ratio[mask].max())
    t_end = t[-1]
    before = run_max[t <= t_end / 10.0]
    if before.size == 0:
        raise DomainError("series must span at least one decade of t")
    trend = float(run_max[-1] / before[-1] - 1.0)
    return MomentScaling(K_hat, trend, bool(math.isfinite(trend) and trend <= growth_limit), run_max)


@dataclass
class EntropyGrowth:
    slope: float
    curvature: float
    t_stat: float
    p_value: float
    passed: bool


def check_entropy_growth(series, window=None, alpha=0.05):
    """Regress ``H_signed`` on ``L = log(1+t)`` and test for positive curvature.

    ``slope`` is the linear-fit coefficient. A quadratic term is fitted too
    and a one-sided t-test asks whether it is positive; the check passes
    unless that test rejects at level ``alpha``.
    """
    if "entropy" not in series:
        raise DomainError("series has no entropy column")
    mask, _ = _mask(series, window)
    H = series["entropy"][mask]
    ok = np.isfinite(H)
    H = H[ok]
    L = np.log1p(series.t[mask][ok])
    n = H.size
    if n < MIN_FIT_POINTS:
        raise NumericError(f"entropy growth check needs at least {MIN_FIT_POINTS} points, got {n}")
    slope = float(np.polyfit(L, H, 1)[0])
    Lc = L - L.mean()
    X = np.column_stack([np.ones(n), Lc, Lc * Lc])
    coef, *_ = np.linalg.lstsq(X, H, rcond=None)
    resid = H - X @ coef
    dof = n - 3
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    se = math.sqrt(cov[2, 2])
    curv = float(coef[2])
    scale = max(float(np.ptp(H)), 1e-300)
    if se <= 1e-12 * scale:
        # exact fit: decide on the sign of the curvature beyond round-off
        t_stat = math.inf if curv * np.ptp(L) ** 2 > 1e-9 * scale else 0.0
    else:
        t_stat = curv / se
    p_value = float(stats.t.sf(t_stat, dof))
    return EntropyGrowth(slope, curv, float(t_stat), p_value, bool(p_value >= alpha))


@dataclass
class IntegratedHaff:
    liminf_ratio: float
    spread: float
    passed: bool


def check_integrated_haff(series, stability=0.2):
    """``I(t) = int_0^t sqrt(E) ds`` against ``log(1+t)`` over the last decade.

    Passes when the ratio stays positive and its relative spread
    ``(max - min) / min`` over ``t in [t_end/10, t_end]`` is at most
    ``stability``.
    """
    t = series.t
    E = series["E"]
    if np.any(~(E > 0)):
        raise DomainError("energy must be positive")
    if t[0] != 0.0:
        raise DomainError("the integral needs the row at t = 0")
    I = cumulative_trapezoid(np.sqrt(E), t, initial=0.0)
    last = t >= t[-1] / 10.0
    last &= t > 0
    ratio = I[last] / np.log1p(t[last])
    lo, hi = float(ratio.min()), float(ratio.max())
    spread = (hi - lo) / lo if lo > 0 else math.inf
    return IntegratedHaff(lo, spread, bool(lo > 0 and spread <= stability))


# ---------------------------------------------------------------------------
# experiment matrix

SUMMARY_COLUMNS = [
    "run_id", "model", "gamma", "theory_exp", "fitted_exp", "residual",
    "c_hat", "C_hat", "threshold_verdict", "entropy_slope",
]


@dataclass
class MatrixConfig:
    constants: tuple = (0.3, 0.5, 0.8, 0.9, 0.95)
    viscoelastic: tuple = (0.5, 1.0, 2.0)
    N: int = 100000
    seed: int = 0
    theta: float = 1.0 / 3.0
    t_end: float = 1e9
    stop_energy_ratio: float = 1e-3
    points_per_decade: int = 32
    entropy: bool = True
    workers: int = 1


def run_seed(seed, index):
    """Per-run seed derived from the matrix seed."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _model_gamma(model):
    return 0.0 if isinstance(model, Constant) else 0.2


def threshold_verdict(model, series=None):
    """Weak-inelasticity verdict for one run."""
    base = constant_threshold()
    if isinstance(model, Constant):
        side = "above" if model.e0 >= base.critical_e else "below"
        return f"{side} critical ~{base.critical_e:.3f}"
    gamma = _model_gamma(model)
    ell = ell_gamma(model, gamma)
    if series is None or moment_column(2 * gamma) not in series:
        return f"ell={ell:.4g} (no run data for ell0)"
    A = float(np.max(series[moment_column(2 * gamma)]) ** (1.0 / 3.0))
    rho = float(series[moment_column(1.5)][0] / series["E"][0] ** 1.5)
    rep = ell0_threshold(gamma, A, rho)
    side = "below" if ell < rep.ell0 else "above"
    return f"ell={ell:.4g} {side} ell0={rep.ell0:.4g}"


def matrix_runs(cfg):
    models = [Constant(float(e)) for e in cfg.constants] + [Viscoelastic(float(a)) for a in cfg.viscoelastic]
    runs = []
    for i, model in enumerate(models):
        tag = f"const_{model.e0:g}" if isinstance(model, Constant) else f"visco_{model.a:g}"
        runs.append((i, tag, model))
    return runs


def _sim_config(cfg, index, model):
    from .dsmc import SimulationConfig

    gamma = _model_gamma(model)
    ps = sorted({0.5, 1.0, 1.5, 2.0} | ({2.0 * gamma} if gamma > 0 else set()))
    return SimulationConfig(
        N=cfg.N,
        model=model,
        init={"kind": "maxwellian", "theta": cfg.theta},
        t_end=cfg.t_end,
        seed=run_seed(cfg.seed, index),
        points_per_decade=cfg.points_per_decade,
        moment_ps=tuple(ps),
        entropy=cfg.entropy,
        stop_energy_ratio=cfg.stop_energy_ratio,
    )


def _summary_row(run_id, model, series):
    gamma = _model_gamma(model)
    row = {"run_id": run_id, "model": describe(model), "gamma": gamma, "theory_exp": theory_exponent(gamma)}
    fit = fit_decay(series, "E")
    sw = check_sandwich(series, gamma)
    row.update(fitted_exp=fit.exponent, residual=fit.residual, c_hat=sw.c_hat, C_hat=sw.C_hat)
    row["threshold_verdict"] = threshold_verdict(model, series)
    if "entropy" in series and np.all(np.isfinite(series["entropy"])):
        row["entropy_slope"] = check_entropy_growth(series).slope
    else:
        row["entropy_slope"] = math.nan
    return row


def _execute(cfg, index, tag, model, out_dir):
    from .dsmc import run

    sim = _sim_config(cfg, index, model)
    series = run(sim)
    path = os.path.join(out_dir, f"dsmc_{tag}.csv")
    series.to_csv(path)
    with open(path[:-4] + ".json", "w") as fh:
        json.dump({"config": sim.as_dict(), "meta": series.meta}, fh, indent=2, sort_keys=True)
    rows = [_summary_row(f"dsmc_{tag}", model, series)]
    mf = integrate_meanfield_energy(model, float(series["E"][0]), float(series.t[-1]), per_decade=cfg.points_per_decade)
    mf_path = os.path.join(out_dir, f"meanfield_{tag}.csv")
    mf.to_csv(mf_path)
    mf_row = _summary_row(f"meanfield_{tag}", model, mf)
    mf_row["threshold_verdict"] = threshold_verdict(model, series)
    rows.append(mf_row)
    return rows, [path, path[:-4] + ".json", mf_path]


def _fmt(value):
    return format(value, ".17g") if isinstance(value, float) else str(value)


@dataclass
class MatrixReport:
    rows: list
    files: list
    failures: list

    @property
    def ok(self):
        return not self.failures


def experiment_matrix(cfg, out_dir):
    """Run every model of ``cfg`` through DSMC and the mean-field ODE.

    Writes one CSV per run (plus a JSON sidecar for DSMC runs) and
    ``summary.csv``. A failing run is logged and recorded in
    ``failures``; the remaining runs still execute.
    """
    os.makedirs(out_dir, exist_ok=True)
    runs = matrix_runs(cfg)
    results = {}
    failures = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(_execute, cfg, i, tag, model, out_dir): (i, tag) for i, tag, model in runs}
            for fut, (i, tag) in futures.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:  # keep the matrix going
                    log.error("run %s failed: %s", tag, exc)
                    failures.append((tag, str(exc)))
    else:
        for i, tag, model in runs:
            try:
                results[i] = _execute(cfg, i, tag, model, out_dir)
            except Exception as exc:  # keep the matrix going
                log.error("run %s failed: %s", tag, exc)
                failures.append((tag, str(exc)))
    rows, files = [], []
    for i in sorted(results):
        rows.extend(results[i][0])
        files.extend(results[i][1])
    summary = os.path.join(out_dir, "summary.csv")
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])
    files.append(summary)
    return MatrixReport(rows, files, failures)
