"""Integrate the moment comparison system and report m_3/2 / E^3/2.

    python scripts/moment_hierarchy.py --e0 0.9 --p-max 2 --t-end 1000
"""

import argparse

from granular_cooling.moments import MomentVector, gaussian_moments, integrate_moment_hierarchy
from granular_cooling.restitution import Constant


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e0", type=float, default=0.9)
    ap.add_argument("--p-max", type=float, default=2.0)
    ap.add_argument("--t-end", type=float, default=1000.0)
    args = ap.parse_args()
    orders = [1.0 + 0.5 * i for i in range(int(round(2 * (args.p_max - 1))) + 1)]
    mv0 = gaussian_moments(1 / 3, orders)
    ts = integrate_moment_hierarchy(Constant(args.e0), mv0, args.p_max, args.t_end, per_decade=4)
    print("t, E, m_3/2 / E^3/2, log-convex")
    for i in range(len(ts)):
        mv = MomentVector({p: ts[c][i] for p, c in zip(orders, ts.columns[1:])})
        print(f"{ts.t[i]:10.4g} {ts['m_1'][i]:12.5g} {ts['m_1.5'][i] / ts['m_1'][i] ** 1.5:10.5f} {mv.log_convex_ok(1e-9)}")


if __name__ == "__main__":
    main()
