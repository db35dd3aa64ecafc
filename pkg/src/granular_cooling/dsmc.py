"""Direct simulation Monte Carlo for the homogeneous inelastic Boltzmann equation.

The gas is a single collision cell of ``N`` equally weighted particles.
Pairs collide at rate ``|u| / N`` (hard spheres), which makes one unit of
simulated time match the kinetic equation's time. Each step uses the
no-time-counter scheme: ``Poisson(N g_max dt / 2)`` candidate pairs are
drawn and each is accepted with probability ``|u| / g_max``.

Candidates within a batch never share a particle, so a batch can be
updated with vectorised numpy operations.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .entropy import entropy_knn
from .errors import ConfigError, NumericError
from .moments import MomentVector
from .restitution import describe
from .timeseries import TimeSeries, moment_column

log = logging.getLogger(__name__)

COLLISIONS_PER_STEP = 0.1


@dataclass
class SimulationConfig:
    """Parameters of one DSMC run.

    ``init`` is a mapping with ``kind`` in ``{"maxwellian", "uniform_ball",
    "two_temperature"}`` and the matching parameters (``theta``; ``R``;
    ``theta1``, ``theta2``, ``mix``). When ``output_times`` is not given,
    outputs are log-spaced from ``t_min`` to ``t_end`` with
    ``points_per_decade`` points per decade, plus ``t = 0``. A run stops
    early at the first output where ``E <= stop_energy_ratio * E(0)``.
    """

    N: int
    model: object
    init: dict
    t_end: float
    seed: int
    output_times: list | None = None
    t_min: float = 1e-2
    points_per_decade: int = 64
    majorant_refresh: int = 64
    moment_ps: tuple = (0.5, 1.0, 1.5, 2.0)
    entropy: bool = True
    entropy_k: int = 5
    entropy_bootstrap: int = 16
    stop_energy_ratio: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N}")
        self.N = int(self.N)
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.init.get("kind") not in ("maxwellian", "uniform_ball", "two_temperature"):
            raise ConfigError(f"unknown initial distribution {self.init.get('kind')!r}")
        self.moment_ps = tuple(float(p) for p in self.moment_ps)
        if not self.moment_ps:
            raise ConfigError("moment_ps must not be empty")
        times = self.times()
        if np.any(np.diff(times) <= 0):
            raise ConfigError("output times must be strictly increasing")
        if self.majorant_refresh < 1:
            raise ConfigError("majorant_refresh must be at least 1")

    def times(self):
        if self.output_times is not None:
            return np.asarray(self.output_times, dtype=float)
        t_min = min(self.t_min, self.t_end)
        decades = math.log10(self.t_end) - math.log10(t_min)
        n = max(2, int(math.ceil(self.points_per_decade * decades)) + 1)
        return np.concatenate(([0.0], np.logspace(math.log10(t_min), math.log10(self.t_end), n)))

    def as_dict(self):
        out = {
            "N": self.N,
            "restitution": self.model.params(),
            "init": dict(self.init),
            "t_end": self.t_end,
            "seed": self.seed,
            "t_min": self.t_min,
            "points_per_decade": self.points_per_decade,
            "majorant_refresh": self.majorant_refresh,
            "moment_ps": list(self.moment_ps),
            "entropy": self.entropy,
            "entropy_k": self.entropy_k,
            "entropy_bootstrap": self.entropy_bootstrap,
            "stop_energy_ratio": self.stop_energy_ratio,
        }
        if self.output_times is not None:
            out["output_times"] = [float(t) for t in self.output_times]
        return out


@dataclass
class ParticleEnsemble:
    """Empirical measure of ``N`` velocities with uniform weights ``1/N``."""

    velocities: np.ndarray
    rng: np.random.Generator
    time: float = 0.0
    collision_count: int = 0
    g_max: float = 0.0
    steps: int = 0
    breaches: int = 0
    aux_rng: np.random.Generator | None = field(default=None, repr=False)

    @property
    def N(self):
        return self.velocities.shape[0]

    def energy(self):
        v = self.velocities
        return float(np.einsum("ij,ij->", v, v) / v.shape[0])

    def momentum(self):
        return self.velocities.mean(axis=0)

    def refresh_majorant(self):
        speeds = np.sqrt(np.einsum("ij,ij->i", self.velocities, self.velocities))
        self.g_max = 2.0 * float(speeds.max())


def _sample_initial(init, N, rng):
    kind = init["kind"]
    if kind == "maxwellian":
        return rng.normal(0.0, math.sqrt(float(init["theta"])), size=(N, 3))
    if kind == "uniform_ball":
        R = float(init["R"])
        direction = rng.normal(size=(N, 3))
        direction /= np.linalg.norm(direction, axis=1)[:, None]
        radius = R * rng.random(N) ** (1.0 / 3.0)
        return direction * radius[:, None]
    if kind == "two_temperature":
        mix = float(init["mix"])
        hot = rng.random(N) < mix
        scale = np.where(hot, math.sqrt(float(init["theta1"])), math.sqrt(float(init["theta2"])))
        return rng.normal(size=(N, 3)) * scale[:, None]
    raise ConfigError(f"unknown initial distribution {kind!r}")


def initial_energy(init):
    """Second moment ``int f |v|^2`` of the configured initial distribution."""
    kind = init["kind"]
    if kind == "maxwellian":
        return 3.0 * float(init["theta"])
    if kind == "uniform_ball":
        return 0.6 * float(init["R"]) ** 2
    mix = float(init["mix"])
    return 3.0 * (mix * float(init["theta1"]) + (1.0 - mix) * float(init["theta2"]))


def init_ensemble(config):
    """Sample the initial ensemble, shift it to zero mean velocity and
    rescale it to the exact initial energy.

    Two independent streams are derived from ``config.seed``: one drives
    the collision process, the other the diagnostics.
    """
    if config.N < 2:
        raise ConfigError("N must be at least 2")
    dyn_seq, aux_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(dyn_seq)
    v = _sample_initial(config.init, config.N, rng)
    v -= v.mean(axis=0)
    # rescale so E(0) equals the energy of the target distribution exactly
    v *= math.sqrt(initial_energy(config.init) / float(np.mean(np.einsum("ij,ij->i", v, v))))
    ens = ParticleEnsemble(velocities=v, rng=rng, aux_rng=np.random.default_rng(aux_seq))
    ens.refresh_majorant()
    return ens


def sample_direction(u, rng):
    """Impact directions with density proportional to ``|u . n|``.

    Directions are drawn on the hemisphere ``u . n > 0`` with
    ``cos(angle to u) = sqrt(U)`` and a uniform azimuth. The collision rule
    is unchanged under ``n -> -n``, so the other hemisphere is redundant.
    Accepts one vector of shape ``(3,)`` or a batch of shape ``(m, 3)``.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    norm = np.linalg.norm(u, axis=1)
    if np.any(norm == 0):
        raise ValueError("relative velocity must be non-zero")
    uhat = u / norm[:, None]
    # any axis not parallel to uhat seeds the orthonormal frame
    axis = np.zeros_like(uhat)
    use_x = np.abs(uhat[:, 0]) < 0.9
    axis[use_x, 0] = 1.0
    axis[~use_x, 1] = 1.0
    e1 = axis - np.einsum("ij,ij->i", axis, uhat)[:, None] * uhat
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(uhat, e1)
    m = u.shape[0]
    cos_t = np.sqrt(rng.random(m))
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    phi = 2.0 * math.pi * rng.random(m)
    n = cos_t[:, None] * uhat + (sin_t * np.cos(phi))[:, None] * e1 + (sin_t * np.sin(phi))[:, None] * e2
    n /= np.linalg.norm(n, axis=1)[:, None]
    return n[0] if single else n


def collide_pair(v, v_star, n, model):
    """Post-collision velocities for impact direction ``n``.

    ``v' = v - (1+e)/2 (u.n) n`` and ``v*' = v* + (1+e)/2 (u.n) n`` with
    ``u = v - v*`` and ``e = e(|u.n|)``. Works on single vectors or on
    batches of shape ``(m, 3)``.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    n = np.asarray(n, dtype=float)
    un = np.sum((v - v_star) * n, axis=-1)
    e = model.e(np.abs(un))
    jump = (0.5 * (1.0 + e) * un)[..., None] * n
    return v - jump, v_star + jump


def _collide_batch(ens, model, n_candidates):
    rng = ens.rng
    idx = rng.choice(ens.N, size=2 * n_candidates, replace=False)
    i, j = idx[:n_candidates], idx[n_candidates:]
    v = ens.velocities
    u = v[i] - v[j]
    g = np.sqrt(np.einsum("ij,ij->i", u, u))
    accept = rng.random(n_candidates) * ens.g_max < g
    breach = g > ens.g_max
    accept &= g > 0
    if not np.any(accept):
        return bool(np.any(breach)), float(g.max(initial=0.0))
    i, j, u = i[accept], j[accept], u[accept]
    n = sample_direction(u, rng)
    un = np.einsum("ij,ij->i", u, n)
    e = model.e(np.abs(un))
    jump = (0.5 * (1.0 + e) * un)[:, None] * n
    v[i] -= jump
    v[j] += jump
    ens.collision_count += int(i.size)
    return bool(np.any(breach)), float(g.max(initial=0.0))


def step(ens, dt, model, majorant_refresh=64):
    """Advance the ensemble by ``dt`` with the no-time-counter scheme.

    A relative speed above the majorant is still accepted (probability 1)
    and triggers an immediate majorant refresh.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if ens.steps % majorant_refresh == 0:
        ens.refresh_majorant()
    n_candidates = int(ens.rng.poisson(ens.N * ens.g_max * dt / 2.0))
    half = ens.N // 2
    while n_candidates > 0:
        batch = min(n_candidates, half)
        breached, g_seen = _collide_batch(ens, model, batch)
        if breached:
            ens.breaches += 1
            old = ens.g_max
            ens.refresh_majorant()
            ens.g_max = max(ens.g_max, g_seen)
            log.info("majorant breach: |u|=%.6g > g_max=%.6g, refreshed to %.6g", g_seen, old, ens.g_max)
        n_candidates -= batch
    ens.time += dt
    ens.steps += 1
    return ens


def measure_moments(ens, ps):
    """``m_p = (1/N) sum |v_i|**(2p)`` for each ``p`` in ``ps``."""
    if len(ps) == 0:
        raise ValueError("at least one moment order is required")
    s = np.einsum("ij,ij->i", ens.velocities, ens.velocities)
    return MomentVector({p: float(np.mean(s**p)) for p in ps}, time=ens.time)


def series_columns(moment_ps):
    return ["t", "E"] + [moment_column(p) for p in moment_ps] + ["entropy", "collisions"]


def _record(series, ens, config):
    if not np.all(np.isfinite(ens.velocities)):
        raise NumericError(f"non-finite velocities at t={ens.time}")
    mv = measure_moments(ens, config.moment_ps)
    row = {"t": ens.time, "E": ens.energy(), "collisions": ens.collision_count}
    for p in config.moment_ps:
        row[moment_column(p)] = mv[p]
    if config.entropy:
        row["entropy"] = entropy_knn(ens.velocities, k=config.entropy_k, n_boot=config.entropy_bootstrap, rng=ens.aux_rng).H_signed
    else:
        row["entropy"] = math.nan
    series.append(**row)
    return row


class RunAborted(NumericError):
    """A run stopped on a numerical failure; ``series`` holds the rows recorded so far."""

    def __init__(self, message, series):
        super().__init__(message)
        self.series = series


def run(config, progress=None):
    """Run a simulation and return its diagnostics as a :class:`TimeSeries`.

    The step size keeps the expected number of collisions per particle per
    step at or below 0.1, using ``<|u|> <= sqrt(2E)`` at zero mean velocity,
    and is shortened to land exactly on each output time.
    """
    model = config.model
    ens = init_ensemble(config)
    series = TimeSeries(series_columns(config.moment_ps), meta={"model": describe(model), "kind": "dsmc"})
    times = config.times()
    if times[0] == 0.0:
        first = _record(series, ens, config)
        times = times[1:]
    else:
        first = None
    E0 = ens.energy() if first is None else first["E"]
    try:
        for target in times:
            while ens.time < target:
                E = ens.energy()
                if not math.isfinite(E):
                    raise NumericError(f"non-finite energy at t={ens.time}")
                dt = COLLISIONS_PER_STEP / math.sqrt(2.0 * E) if E > 0 else target - ens.time
                remaining = target - ens.time
                if dt >= remaining * (1.0 - 1e-12):
                    dt = remaining
                step(ens, dt, model, config.majorant_refresh)
                if dt == remaining:
                    ens.time = float(target)
            row = _record(series, ens, config)
            if progress is not None:
                progress(row)
            if config.stop_energy_ratio is not None and row["E"] <= config.stop_energy_ratio * E0:
                break
    except NumericError as exc:
        raise RunAborted(str(exc), series) from exc
    series.meta.update({"steps": ens.steps, "breaches": ens.breaches})
    return series
