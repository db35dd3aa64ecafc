"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and
then asserts, so a failing criterion also fails the test.
"""

import math

import numpy as np
import pytest

from conftest import record
from granular_cooling.cli import main
from granular_cooling.dsmc import SimulationConfig, collide_pair, run
from granular_cooling.entropy import check_inequalities, lambert_w, moment_lower_bound, standard_family
from granular_cooling.haff import (
    check_entropy_growth,
    check_integrated_haff,
    check_moment_scaling,
    check_sandwich,
    fit_decay,
)
from granular_cooling.moments import constant_threshold, integrate_meanfield_energy, kappa, kappa_quadrature
from granular_cooling.restitution import Constant, PowerLaw, Viscoelastic, ell_gamma

import oracles

N = 100_000
THETA0 = 1.0 / 3.0  # E(0) = 3 theta = 1


def _dsmc(model, seed, stop=1e-3, t_end=1e6, entropy=False):
    cfg = SimulationConfig(
        N=N,
        model=model,
        init={"kind": "maxwellian", "theta": THETA0},
        t_end=t_end,
        seed=seed,
        points_per_decade=16,
        entropy=entropy,
        stop_energy_ratio=stop,
    )
    return run(cfg)


@pytest.fixture(scope="module")
def visco_run():
    return _dsmc(Viscoelastic(1.0), seed=2024, entropy=True)


def test_c01_povzner_constant():
    diff = abs(kappa(1.5) - kappa_quadrature(1.5))
    crit = constant_threshold().critical_e
    ok = diff <= 1e-10 and 0.805 <= crit <= 0.813
    record(1, "Povzner constant and critical restitution", ok, f"|closed-quad|={diff:.2e}, critical_e={crit:.6f}")
    assert ok


def test_c02_haff_constant():
    s = _dsmc(Constant(0.9), seed=2023)
    fit = fit_decay(s)
    sw = check_sandwich(s, 0.0)
    drop = s["E"][0] / s["E"][-1]
    ok = drop >= 1e3 and abs(fit.exponent + 2.0) <= 0.1 and sw.ratio <= 10
    record(2, "Haff's law, constant e=0.9", ok,
           f"E drop {drop:.3g}, exponent {fit.exponent:.4f} (target -2 +- 0.1), sandwich ratio {sw.ratio:.3f}")
    assert ok


def test_c03_haff_viscoelastic(visco_run):
    s = visco_run
    fit = fit_decay(s)
    drop = s["E"][0] / s["E"][-1]
    ok = drop >= 1e3 and abs(fit.exponent + 5.0 / 3.0) <= 0.12
    record(3, "Haff's law, viscoelastic a=1", ok, f"E drop {drop:.3g}, exponent {fit.exponent:.4f} (target -5/3 +- 0.12)")
    assert ok


def test_c04_meanfield_exact():
    errs = {}
    for e0 in (0.3, 0.5, 0.9):
        ts = integrate_meanfield_energy(Constant(e0), 1.0, 100.0)
        assert ts.t[0] == 0.0 and ts.t[-1] == pytest.approx(100.0)
        exact = np.array([oracles.meanfield_constant(e0, 1.0, t) for t in ts.t])
        errs[e0] = float(np.max(np.abs(ts["E"] / exact - 1.0)))
    ok = all(err <= 1e-6 for err in errs.values())
    record(4, "mean-field ODE matches the closed form on [0, 100]", ok,
           ", ".join(f"e={e0}: {err:.1e}" for e0, err in errs.items()))
    assert ok


def test_c05_collision_identities():
    rng = np.random.default_rng(55)
    models = [Constant(0.5), Constant(1.0), PowerLaw(0.4, 0.3), PowerLaw(2.0, 1.0), Viscoelastic(1.0)]
    per = 1_000_000 // len(models)
    worst = {"momentum": 0.0, "normal": 0.0, "energy": 0.0, "tangential": 0.0}
    for model in models:
        scale = np.exp(rng.uniform(-3, 3, size=(per, 1)))
        v, w = rng.normal(size=(per, 3)) * scale, rng.normal(size=(per, 3)) * scale
        n = rng.normal(size=(per, 3))
        n /= np.linalg.norm(n, axis=1)[:, None]
        v2, w2 = collide_pair(v, w, n, model)
        u, u2 = v - w, v2 - w2
        un = np.einsum("ij,ij->i", u, n)
        e = model.e(np.abs(un))
        mag = 1.0 + np.sum(v * v + w * w, axis=1)
        worst["momentum"] = max(worst["momentum"], float(np.max(np.abs(v2 + w2 - v - w) / np.sqrt(mag)[:, None])))
        worst["normal"] = max(worst["normal"], float(np.max(np.abs(np.einsum("ij,ij->i", u2, n) + e * un) / np.sqrt(mag))))
        dK = 0.5 * np.sum(v2 * v2 + w2 * w2 - v * v - w * w, axis=1)
        worst["energy"] = max(worst["energy"], float(np.max(np.abs(dK + 0.25 * (1 - e * e) * un * un) / mag)))
        tang = lambda x: x - np.einsum("ij,ij->i", x, n)[:, None] * n
        worst["tangential"] = max(worst["tangential"], float(np.max(np.abs(tang(u2) - tang(u)) / np.sqrt(mag)[:, None])))
    ok = all(v <= 1e-12 for v in worst.values())
    record(5, "collision micro-identities (10^6 collisions)", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_c06_viscoelastic_fidelity():
    a_values = (0.5, 1.0, 2.0)
    grid = np.logspace(-3, 3, 601)
    resid = max(float(np.max(np.abs(Viscoelastic(a).e(grid) + a * grid**0.2 * Viscoelastic(a).e(grid) ** 0.6 - 1.0)))
                for a in a_values)
    ell_err = max(abs(ell_gamma(Viscoelastic(a), 0.2) / a - 1.0) for a in a_values)
    big = np.logspace(6, 10, 9)
    law_err = max(float(np.max(np.abs(Viscoelastic(a).e(big) * big ** (1 / 3) / a ** (-5 / 3) - 1.0))) for a in a_values)
    ok = resid <= 1e-12 and ell_err <= 0.05 and law_err <= 0.05
    record(6, "viscoelastic model fidelity", ok,
           f"residual {resid:.1e}, ell_1/5 rel. error {ell_err:.3f}, large-r law rel. error {law_err:.4f}")
    assert ok


def test_c07_entropy_growth(visco_run):
    res = check_entropy_growth(visco_run)
    record(7, "entropy grows at most logarithmically (viscoelastic run)", res.passed,
           f"slope {res.slope:.3f}, curvature {res.curvature:.4f}, t={res.t_stat:.2f}, one-sided p={res.p_value:.3g}")
    assert res.passed


def test_c08_appendix_inequalities():
    family = standard_family(seed=8, n_mixtures=100, n_balls=20)
    rep = check_inequalities(family)
    explicit = [m for m in family if m.moment(2) < moment_lower_bound(m.entropies()[1], 3, 2, 0.5)]
    ok = rep.ok and not explicit
    record(8, "moment/entropy inequalities on 100 mixtures + 20 balls", ok,
           f"violations {len(rep.violations)}, explicit M_2 bound failures {len(explicit)}, "
           f"worst slack hbar_k2 {rep.worst('hbar_k2'):.2e}, M_2 bound {rep.worst('moment_k2_eps0.5'):.3f}")
    assert ok


def test_c09_moment_scaling():
    s = _dsmc(Constant(0.95), seed=2025)
    res = check_moment_scaling(s, 1.5)
    record(9, "m_3/2 / E^3/2 running max stabilises (e=0.95)", res.passed,
           f"last-decade increase {res.trend:.4f}, K_hat {res.K_hat:.4f}, t_end {s.t[-1]:.4g}")
    assert res.passed


def test_c10_integrated_haff():
    s = _dsmc(Constant(0.5), seed=2026, stop=None, t_end=1e4)
    res = check_integrated_haff(s)
    record(10, "integrated Haff's law (e=0.5)", res.passed, f"liminf ratio {res.liminf_ratio:.4f}, spread {res.spread:.4f}")
    assert res.passed


def test_c11_lambert_w():
    x = np.concatenate([np.linspace(-1 / math.e + 1e-6, 0.0, 5001), np.logspace(-12, 6, 5001)])
    w = lambert_w(x)
    rt = float(np.max(np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x))))
    w1 = abs(lambert_w(1.0) - oracles.newton_w(1.0))
    ok = rt <= 1e-12 and w1 <= 1e-10
    record(11, "Lambert W round trip and W(1)", ok, f"round-trip {rt:.1e}, |W(1) - Newton| {w1:.1e}")
    assert ok


def test_c12_reproducibility(tmp_path):
    cfg = tmp_path / "repro.toml"
    cfg.write_text(
        "seed = 12\nN = 100000\nt_end = 1e6\n\n"
        '[restitution]\nkind = "constant"\ne0 = 0.9\n\n'
        '[init]\nkind = "maxwellian"\ntheta = 0.3333333333333333\n\n'
        "[output]\npoints_per_decade = 16\nstop_energy_ratio = 1e-3\n"
    )
    codes = [main(["run", str(cfg), "--out-dir", str(tmp_path / d)]) for d in ("a", "b")]
    a, b = (tmp_path / "a" / "repro.csv").read_bytes(), (tmp_path / "b" / "repro.csv").read_bytes()
    ok = codes == [0, 0] and a == b
    record(12, "identical config + seed give byte-identical CSV", ok, f"exit codes {codes}, {len(a)} bytes, identical={a == b}")
    assert ok
