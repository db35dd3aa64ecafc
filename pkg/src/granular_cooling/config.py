"""TOML configuration files for runs, model checks and experiment matrices.

A run file looks like::

    seed = 7
    N = 100000
    t_end = 1000.0

    [restitution]
    kind = "constant"     # or "power_law" (alpha, gamma, e_floor) / "viscoelastic" (a)
    e0 = 0.9

    [init]
    kind = "maxwellian"   # or "uniform_ball" (R) / "two_temperature" (theta1, theta2, mix)
    theta = 0.3333333333333333

    [output]              # every key optional
    t_min = 0.01
    points_per_decade = 64
    moment_ps = [0.5, 1.0, 1.5, 2.0]
    entropy = true
    stop_energy_ratio = 1e-3

A matrix file holds a single ``[matrix]`` table whose keys are the fields
of :class:`granular_cooling.haff.MatrixConfig`.
"""

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dsmc import SimulationConfig
from .errors import ConfigError, DomainError
from .haff import MatrixConfig
from .restitution import model_from_dict

RUN_KEYS = {"seed", "N", "t_end", "restitution", "init", "output"}
OUTPUT_KEYS = {
    "t_min", "points_per_decade", "moment_ps", "entropy", "entropy_k",
    "entropy_bootstrap", "stop_energy_ratio", "output_times", "majorant_refresh",
}


def read_toml(path):
    """Parse a TOML file; syntax errors become :class:`ConfigError` with position."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _unknown(keys, allowed, where):
    extra = sorted(set(keys) - allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {', '.join(extra)}")


def model_from_table(table, where="[restitution]"):
    if not isinstance(table, dict):
        raise ConfigError(f"{where} must be a table")
    try:
        return model_from_dict(table)
    except KeyError as exc:
        raise ConfigError(f"{where} is missing key {exc.args[0]!r}") from exc
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def run_config_from_dict(data, seed=None):
    _unknown(data, RUN_KEYS, "run config")
    for key in ("N", "t_end", "restitution", "init"):
        if key not in data:
            raise ConfigError(f"run config is missing {key!r}")
    if seed is None:
        if "seed" not in data:
            raise ConfigError("run config has no seed and none was given on the command line")
        seed = data["seed"]
    output = data.get("output", {})
    _unknown(output, OUTPUT_KEYS, "[output]")
    model = model_from_table(data["restitution"])
    try:
        return SimulationConfig(
            N=data["N"],
            model=model,
            init=dict(data["init"]),
            t_end=float(data["t_end"]),
            seed=int(seed),
            **output,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path, seed=None):
    """Read a run file into a :class:`SimulationConfig`; ``seed`` overrides the file."""
    return run_config_from_dict(read_toml(path), seed)


def load_model(path):
    """Read the ``[restitution]`` table of a file."""
    data = read_toml(path)
    if "restitution" not in data:
        raise ConfigError(f"{path} has no [restitution] table")
    return model_from_table(data["restitution"])


def load_matrix_config(path, seed=None):
    data = read_toml(path)
    if "matrix" not in data:
        raise ConfigError(f"{path} has no [matrix] table")
    table = dict(data["matrix"])
    allowed = set(MatrixConfig.__dataclass_fields__)
    _unknown(table, allowed, "[matrix]")
    if seed is not None:
        table["seed"] = seed
    for key in ("constants", "viscoelastic"):
        if key in table:
            table[key] = tuple(float(x) for x in table[key])
    try:
        return MatrixConfig(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
