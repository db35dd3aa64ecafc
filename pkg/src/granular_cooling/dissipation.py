"""Energy-dissipation potential and entropy-production kernel.

``psi(model, r)`` is the collision-averaged energy loss for a pair with
squared relative speed ``r``::

    Psi(r) = r**1.5 / 2 * int_0^1 (1 - e(sqrt(r) z)**2) z**3 dz

``phi(model, rho)`` is the inelastic excess in the entropy balance::

    Phi(rho) = 2 / rho**2 * int_0^{theta^-1(rho)} (r - theta(r) theta'(r)) dr

Both reduce to closed forms for constant restitution.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import quadrature
from .errors import DomainError
from .restitution import Constant, invert_theta


def _one_minus_e_squared(model, s):
    ome = model.one_minus_e(s)
    return ome * (2.0 - ome)


def psi(model, r):
    """Dissipation potential at squared relative speed ``r >= 0``."""
    if np.ndim(r) > 0:
        return np.array([psi(model, float(x)) for x in np.ravel(r)]).reshape(np.shape(r))
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise DomainError(f"psi needs a finite non-negative argument, got {r}")
    if r == 0.0:
        return 0.0
    scale = r**1.5
    if isinstance(model, Constant):
        return (1.0 - model.e0**2) * scale / 8.0
    sr = math.sqrt(r)
    breaks = [b / sr for b in model.breakpoints() if 0 < b / sr < 1]
    integral = quadrature.integrate(
        lambda z: _one_minus_e_squared(model, sr * z) * z**3,
        0.0,
        1.0,
        abs_tol=2e-12 * max(1.0, scale) / scale,
        rel_tol=1e-13,
        breakpoints=breaks,
    )
    return 0.5 * scale * integral


def _phi_integrand(model, r):
    # r - theta theta' = r (1 - e J) = r ((1 - e)(1 + e) - e r e')
    ome = model.one_minus_e(r)
    e = 1.0 - ome
    return r * (ome * (2.0 - ome) - e * r * model.de(r))


def phi(model, rho):
    """Entropy-production kernel at relative speed ``rho > 0``."""
    if np.ndim(rho) > 0:
        return np.array([phi(model, float(x)) for x in np.ravel(rho)]).reshape(np.shape(rho))
    rho = float(rho)
    if not math.isfinite(rho) or rho <= 0:
        raise DomainError(f"phi needs a finite positive argument, got {rho}")
    if isinstance(model, Constant):
        return (1.0 - model.e0**2) / model.e0**2
    upper = invert_theta(model, rho)
    breaks = [b for b in model.breakpoints() if 0 < b < upper]
    integral = quadrature.integrate(
        lambda r: _phi_integrand(model, r),
        0.0,
        upper,
        abs_tol=1e-300,
        rel_tol=1e-11,
        breakpoints=breaks,
    )
    return 2.0 * integral / rho**2


@dataclass
class ShapeReport:
    """Monotonicity and convexity of ``Psi`` sampled on a grid.

    ``worst_pair`` is the consecutive pair with the smallest increment and
    ``worst_triple`` the triple whose slope change is most negative.
    """

    monotone: bool
    worst_pair: tuple
    convex: bool
    worst_triple: tuple
    grid: np.ndarray = field(repr=False)

    @property
    def worst_witness(self):
        return self.worst_pair[0] if not self.monotone else self.worst_triple[1]


def verify_psi_shape(model, grid, tol=1e-10):
    """Check that ``Psi`` is strictly increasing and convex on ``grid``.

    Convexity is tested through the divided differences of ``Psi``: the
    slope change over each triple, relative to the larger slope, must not
    fall below ``-tol``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 64:
        raise DomainError("shape checks need at least 64 grid points")
    values = psi(model, grid)
    diffs = np.diff(values)
    i = int(np.argmin(diffs))
    monotone = bool(np.all(diffs > 0))
    slopes = diffs / np.diff(grid)
    change = np.diff(slopes)
    scale = np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, change / scale, 0.0)
    j = int(np.argmin(rel))
    return ShapeReport(
        monotone=monotone,
        worst_pair=(float(grid[i]), float(grid[i + 1])),
        convex=bool(np.all(rel >= -tol)),
        worst_triple=(float(grid[j]), float(grid[j + 1]), float(grid[j + 2])),
        grid=grid,
    )


@dataclass
class PhiAsymptotics:
    """Small- and large-speed behaviour of ``Phi``.

    ``small_ok`` is ``None`` when ``gamma == 0``: the small-speed law only
    applies for ``gamma > 0``.
    """

    small_ok: bool | None
    large_ok: bool
    small_ratios: np.ndarray
    large_ratios: np.ndarray
    large_slope: float


def phi_asymptotics(model, alpha, gamma, m, grid=None, band=0.2, slope_tol=0.05):
    """Compare ``Phi`` with ``2 alpha rho**gamma`` near 0 and ``rho**(2(m-1))`` at large ``rho``.

    The small-speed ratio must lie in ``[1 - band, 1 + band]`` at the three
    smallest grid points. At large speeds the ratio ``Phi / rho**(2(m-1))``
    must not grow: its log-log slope over the largest decade has to stay
    below ``slope_tol``.
    """
    grid = np.logspace(-8, 8, 161) if grid is None else np.sort(np.asarray(grid, dtype=float))
    if gamma > 0:
        small = grid[:3]
        small_ratios = phi(model, small) / (2.0 * alpha * small**gamma)
        small_ok = bool(np.all(np.abs(small_ratios - 1.0) <= band))
    else:
        small_ratios = np.array([])
        small_ok = None
    large = grid[grid >= grid[-1] / 10.0]
    large_ratios = phi(model, large) / large ** (2.0 * (m - 1.0))
    if np.all(large_ratios > 0):
        slope = float(np.polyfit(np.log(large), np.log(large_ratios), 1)[0])
    else:
        # a non-positive ratio cannot be growing like a power
        slope = 0.0 if np.all(large_ratios == 0) else math.nan
    large_ok = bool(np.all(np.isfinite(large_ratios)) and slope <= slope_tol)
    return PhiAsymptotics(small_ok, large_ok, small_ratios, large_ratios, slope)
