"""Fitted cooling exponent as a function of how far the energy has dropped.

For each energy drop (in decades) the default late-window fit is applied to
the mean-field solution and to a DSMC run. With constant restitution the
energy follows (1 + c t)^-2, whose log-log slope only approaches -2 once
c t >> 1, so short runs give shallower exponents.

    python scripts/exponent_vs_run_length.py --model constant --param 0.9 --N 100000
"""

import argparse
import time

import numpy as np

from granular_cooling.dsmc import SimulationConfig, run
from granular_cooling.haff import fit_decay, theory_exponent
from granular_cooling.moments import integrate_meanfield_energy
from granular_cooling.restitution import Constant, Viscoelastic
from granular_cooling.timeseries import TimeSeries


def truncate(series, ratio):
    E = series["E"]
    k = int(np.argmax(E <= ratio * E[0])) if np.any(E <= ratio * E[0]) else len(E) - 1
    return TimeSeries.from_arrays({"t": series.t[: k + 1], "E": E[: k + 1]})


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", choices=("constant", "viscoelastic"), default="constant")
    ap.add_argument("--param", type=float, default=0.9, help="e0 or a")
    ap.add_argument("--N", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=2023)
    ap.add_argument("--decades", type=float, nargs="+", default=[3, 6, 9])
    ap.add_argument("--skip-dsmc", action="store_true")
    args = ap.parse_args()

    model = Constant(args.param) if args.model == "constant" else Viscoelastic(args.param)
    gamma = 0.0 if args.model == "constant" else 0.2
    print(f"model {args.model}({args.param}), theory exponent {theory_exponent(gamma):.4f}")
    mf = integrate_meanfield_energy(model, 1.0, 1e15, per_decade=16, t_min=1e-2)
    dsmc = None
    if not args.skip_dsmc:
        cfg = SimulationConfig(N=args.N, model=model, init={"kind": "maxwellian", "theta": 1 / 3}, t_end=1e15,
                               seed=args.seed, points_per_decade=16, entropy=False,
                               stop_energy_ratio=10.0 ** -max(args.decades))
        t0 = time.time()
        dsmc = run(cfg)
        print(f"DSMC run: {time.time() - t0:.1f} s, {len(dsmc)} rows, final t {dsmc.t[-1]:.4g}")
    print(f"{'decades':>8} {'meanfield t_end':>16} {'meanfield exp':>14} {'dsmc t_end':>12} {'dsmc exp':>10}")
    for d in args.decades:
        m = truncate(mf, 10.0**-d)
        line = f"{d:8g} {m.t[-1]:16.4g} {fit_decay(m).exponent:14.4f}"
        if dsmc is not None:
            s = truncate(dsmc, 10.0**-d)
            line += f" {s.t[-1]:12.4g} {fit_decay(s).exponent:10.4f}"
        print(line)


if __name__ == "__main__":
    main()
