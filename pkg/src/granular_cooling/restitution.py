"""Restitution-coefficient models and the impact-speed map ``theta(r) = r e(r)``.

Three models are provided:

* :class:`Constant` -- ``e(r) = e0``.
* :class:`PowerLaw` -- ``e(r) = max(1 - alpha r**gamma, floor)``.
* :class:`Viscoelastic` -- ``e`` solves ``e + a r**(1/5) e**(3/5) = 1``.

Every model exposes ``e``, ``one_minus_e`` (computed without cancellation
where the model allows it) and ``de`` (the derivative in ``r``), all
vectorised over numpy arrays. The module-level functions wrap these with
domain checks.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, InvariantViolation


def default_grid(lo=1e-8, hi=1e8, n=2048):
    """Log-spaced impact-speed grid used by all sup/validity checks."""
    return np.logspace(math.log10(lo), math.log10(hi), n)


@dataclass(frozen=True)
class Constant:
    e0: float

    kind = "constant"

    def __post_init__(self):
        if not 0.0 < self.e0 <= 1.0:
            raise DomainError(f"constant restitution must lie in (0, 1], got {self.e0}")

    def e(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.e0)

    def one_minus_e(self, r):
        return np.full_like(np.asarray(r, dtype=float), 1.0 - self.e0)

    def de(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def breakpoints(self):
        return ()

    def params(self):
        return {"kind": self.kind, "e0": self.e0}


@dataclass(frozen=True)
class PowerLaw:
    """``e(r) = max(1 - alpha r**gamma, floor)``.

    The clamp keeps ``e`` positive and bounded away from 1 at large speeds.
    It is raised to at least ``gamma / (1 + gamma)``: below that value the
    unclamped branch would make ``r e(r)`` decrease before the clamp is
    reached. Pass ``e_floor=None`` to disable the clamp entirely.
    """

    alpha: float
    gamma: float
    e_floor: float | None = 0.05
    floor: float | None = field(init=False, repr=False)

    kind = "power_law"

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be non-negative, got {self.gamma}")
        if self.e_floor is None:
            floor = None
        else:
            if not 0.0 < self.e_floor < 1.0:
                raise DomainError(f"e_floor must lie in (0, 1), got {self.e_floor}")
            floor = max(self.e_floor, self.gamma / (1.0 + self.gamma))
        object.__setattr__(self, "floor", floor)

    @property
    def clamp_point(self):
        """Impact speed at which the clamp engages (``inf`` if never)."""
        if self.floor is None:
            return math.inf
        if self.gamma == 0:
            return 0.0 if 1.0 - self.alpha <= self.floor else math.inf
        return ((1.0 - self.floor) / self.alpha) ** (1.0 / self.gamma)

    def one_minus_e(self, r):
        r = np.asarray(r, dtype=float)
        raw = self.alpha * r**self.gamma
        if self.floor is None:
            return raw
        return np.minimum(raw, 1.0 - self.floor)

    def e(self, r):
        r = np.asarray(r, dtype=float)
        raw = 1.0 - self.alpha * r**self.gamma
        if self.floor is None:
            return raw
        return np.maximum(raw, self.floor)

    def de(self, r):
        # left derivative at the clamp point
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where(r > 0, -self.alpha * self.gamma * r ** (self.gamma - 1.0), 0.0)
        if self.gamma == 1.0:
            raw = np.full_like(r, -self.alpha)
        if self.floor is None:
            return raw
        return np.where(r > self.clamp_point, 0.0, raw)

    def breakpoints(self):
        c = self.clamp_point
        return (c,) if 0.0 < c < math.inf else ()

    def params(self):
        return {"kind": self.kind, "alpha": self.alpha, "gamma": self.gamma, "e_floor": self.e_floor}


@dataclass(frozen=True)
class Viscoelastic:
    """Viscoelastic hard spheres: ``e + a r**(1/5) e**(3/5) = 1``.

    With ``y = e**(1/5)`` the equation becomes ``y**5 + b y**3 = 1`` with
    ``b = a r**(1/5)``. The left side is increasing and convex on
    ``[0, 1]`` and is non-negative at ``y0 = min(1, b**(-1/3))``, so Newton
    started from ``y0`` decreases monotonically onto the unique root.
    """

    a: float

    kind = "viscoelastic"

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"viscoelastic constant must be positive, got {self.a}")

    def _root_y(self, r):
        r = np.asarray(r, dtype=float)
        b = self.a * r**0.2
        with np.errstate(divide="ignore"):
            y = np.minimum(1.0, np.where(b > 0, b ** (-1.0 / 3.0), 1.0))
        for _ in range(60):
            y2 = y * y
            g = y2 * y2 * y + b * y2 * y - 1.0
            dg = 5.0 * y2 * y2 + 3.0 * b * y2
            step = g / dg
            y_new = y - step
            # monotone from above: a non-decreasing iterate means convergence
            done = y_new >= y
            y = np.where(done, y, y_new)
            if np.all(done | (np.abs(step) <= 1e-17 * y)):
                break
        return y, b

    def e(self, r):
        y, _ = self._root_y(r)
        return y**5

    def one_minus_e(self, r):
        y, b = self._root_y(r)
        return b * y**3

    def de(self, r):
        # implicit differentiation of e + a r^(1/5) e^(3/5) = 1
        r = np.asarray(r, dtype=float)
        y, _ = self._root_y(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            num = -(self.a / 5.0) * r ** (-0.8) * y**3
            den = 1.0 + 0.6 * self.a * r**0.2 / (y * y)
            out = num / den
        small = np.abs(den) < 1e-14
        if np.any(small):
            out = np.where(small, _fd_derivative(self.e, r), out)
        return np.where(r > 0, out, -np.inf)

    def breakpoints(self):
        return ()

    def params(self):
        return {"kind": self.kind, "a": self.a}


def _fd_derivative(f, r):
    h = 1e-6 * np.maximum(1.0, r)
    return (f(r + h) - f(r - h)) / (2.0 * h)


def model_from_dict(mapping):
    """Build a model from a mapping such as ``{"kind": "viscoelastic", "a": 1.0}``."""
    mapping = dict(mapping)
    kind = mapping.pop("kind", None)
    if kind == "constant":
        return Constant(float(mapping["e0"]))
    if kind in ("power_law", "powerlaw"):
        floor = mapping.get("e_floor", 0.05)
        return PowerLaw(float(mapping["alpha"]), float(mapping["gamma"]), None if floor is None else float(floor))
    if kind == "viscoelastic":
        return Viscoelastic(float(mapping["a"]))
    raise DomainError(f"unknown restitution kind {kind!r}")


def describe(model):
    """Short human-readable label, e.g. ``constant(e0=0.9)``."""
    args = ", ".join(f"{k}={v}" for k, v in model.params().items() if k != "kind")
    return f"{model.kind}({args})"


def _check_speed(r, strict=False):
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("impact speed must be finite")
    if strict and np.any(arr <= 0):
        raise DomainError("impact speed must be positive")
    if np.any(arr < 0):
        raise DomainError("impact speed must be non-negative")
    return arr


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def eval_e(model, r):
    """Restitution coefficient ``e(r)`` for impact speed ``r >= 0``."""
    arr = _check_speed(r)
    return _out(model.e(arr), r)


def eval_theta(model, r):
    """Impact-speed map ``theta(r) = r e(r)``."""
    arr = _check_speed(r)
    return _out(arr * model.e(arr), r)


def jacobian(model, r, return_flag=False):
    """Jacobian ``J(r) = e(r) + r e'(r)`` of the collision map.

    At the clamp point of a :class:`PowerLaw` the left derivative is
    returned; with ``return_flag=True`` a ``(value, at_kink)`` pair is
    returned instead of the bare value.
    """
    arr = _check_speed(r, strict=True)
    value = model.e(arr) + arr * model.de(arr)
    if return_flag:
        kinks = np.asarray(model.breakpoints(), dtype=float)
        if kinks.size:
            flag = np.any(np.isclose(arr[..., None], kinks, rtol=1e-12, atol=0.0), axis=-1)
        else:
            flag = np.zeros(arr.shape, dtype=bool)
        return _out(value, r), (bool(flag) if np.ndim(r) == 0 else flag)
    return _out(value, r)


def invert_theta(model, y, max_doublings=2000):
    """Solve ``theta(r) = y`` for ``r``.

    Brackets the root by doubling, then runs Newton steps safeguarded by
    bisection. Raises :class:`InvariantViolation` when no bracket can be
    found, which happens when ``theta`` is not increasing.
    """
    if np.ndim(y) > 0:
        return np.array([invert_theta(model, float(v), max_doublings) for v in np.ravel(y)]).reshape(np.shape(y))
    y = float(y)
    if not math.isfinite(y) or y < 0:
        raise DomainError(f"theta^-1 needs a finite non-negative argument, got {y}")
    if y == 0.0:
        return 0.0
    if isinstance(model, Constant):
        return y / model.e0

    def theta(r):
        with np.errstate(over="ignore"):
            return r * float(model.e(r))

    lo, hi = 0.0, max(y, 1.0)
    for _ in range(max_doublings):
        if theta(hi) >= y:
            break
        lo = hi
        hi *= 2.0
    else:
        raise InvariantViolation(f"could not bracket theta^-1({y}); theta does not appear to be increasing")

    tol = 1e-13 * y
    r = 0.5 * (lo + hi)
    for _ in range(200):
        f = theta(r) - y
        if abs(f) <= 0.1 * tol:
            return r
        if f > 0:
            hi = r
        else:
            lo = r
        d = float(model.e(r) + r * model.de(r))
        step_ok = d > 0 and math.isfinite(d)
        r_new = r - f / d if step_ok else 0.5 * (lo + hi)
        if not lo < r_new < hi:
            r_new = 0.5 * (lo + hi)
        if r_new == r or hi - lo <= 4e-16 * hi:
            break
        r = r_new
    # non-monotone theta can trap bisection on a spurious crossing
    if abs(theta(r) - y) > tol:
        raise InvariantViolation(f"theta^-1({y}) did not converge; residual {theta(r) - y:.3e}")
    return r


def ell_gamma(model, gamma, grid=None):
    """Grid estimate of ``sup_r (1 - e(r)) / r**gamma``.

    ``gamma = 0`` is accepted only for :class:`Constant`, where the value is
    exactly ``1 - e0``.
    """
    if gamma == 0 and isinstance(model, Constant):
        return 1.0 - model.e0
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("empty grid")
    return float(np.max(model.one_minus_e(grid) / grid**gamma))


@dataclass
class AssumptionReport:
    """Outcome of the grid checks on a restitution model.

    ``structure`` holds four ``(ok, witness)`` pairs: positivity and boundedness
    of ``e``, strict growth of ``theta``, ``limsup e < 1``, and monotone
    convexity of the dissipation potential. Each witness is the grid point
    of worst margin.
    """

    model: str
    structure: list
    gamma: float
    alpha: float
    m: float
    C_large: float
    growth_ok: bool
    ell_gamma: float
    notes: list = field(default_factory=list)

    @property
    def structure_ok(self):
        return all(ok for ok, _ in self.structure)

    @property
    def ok(self):
        return self.structure_ok and self.growth_ok

    def rows(self):
        labels = [
            "0 < e <= 1",
            "theta strictly increasing",
            "limsup e < 1",
            "Psi increasing and convex",
        ]
        out = [(label, ok, witness) for label, (ok, witness) in zip(labels, self.structure)]
        out.append((f"small-r exponent gamma={self.gamma:.6g}, alpha={self.alpha:.6g}", self.gamma >= 0, None))
        out.append((f"large-r theta^-1(y) <= C y^m, m={self.m:.6g}, C={self.C_large:.6g}", self.growth_ok, None))
        return out


def _loglog_slope(x, y):
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def check_assumptions(model, grid=None, psi_grid_points=256):
    """Verify the standing restitution assumptions on a log grid.

    The small-speed exponent ``gamma`` is fitted on the smallest decade of
    the grid and the growth exponent ``m`` of ``theta^-1`` on the largest
    one. Failures are reported, never raised.
    """
    from .dissipation import verify_psi_shape

    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    notes = []
    e = model.e(grid)

    item1 = (bool(np.all((e > 0) & (e <= 1.0))), float(grid[np.argmin(e)]))

    theta = grid * e
    dtheta = np.diff(theta)
    i_t = int(np.argmin(dtheta))
    item2 = (bool(np.all(dtheta > 0)), float(grid[i_t]))

    top = grid >= grid[-1] / 10.0
    i_top = int(np.argmax(e[top]))
    item3 = (bool(np.max(e[top]) < 1.0), float(grid[top][i_top]))

    shape_grid = np.logspace(math.log10(grid[0]), math.log10(grid[-1]), psi_grid_points) ** 2
    shape = verify_psi_shape(model, shape_grid)
    item4 = (shape.monotone and shape.convex, shape.worst_witness)

    ome = model.one_minus_e(grid)
    bottom = grid <= grid[0] * 10.0
    if np.all(ome[bottom] > 0):
        gamma, log_alpha = _loglog_slope(grid[bottom], ome[bottom])
        if abs(gamma) < 1e-9:
            gamma = 0.0
        alpha = math.exp(log_alpha)
    else:
        gamma, alpha = 0.0, 0.0
        notes.append("1 - e vanishes near r = 0 (elastic at small speeds)")

    if item2[0] and np.all(theta[top] > 0):
        m, _ = _loglog_slope(theta[top], grid[top])
        if abs(m - round(m * 2) / 2) < 1e-9:
            m = round(m * 2) / 2
        C_large = float(np.max(grid[top] / theta[top] ** m))
        growth_ok = bool(math.isfinite(m) and m > 0)
        if m < 1.0 + gamma / 2.0:
            # a growth bound with exponent m also holds with any larger exponent
            notes.append(f"growth bound holds with m' = 1 + gamma/2 = {1.0 + gamma / 2.0:.6g}")
    else:
        m, C_large, growth_ok = math.nan, math.nan, False
        notes.append("theta is not invertible on the grid; growth exponent undefined")

    if isinstance(model, Constant) or gamma == 0.0:
        ell = float(np.max(ome))
    else:
        ell = ell_gamma(model, gamma, grid)

    return AssumptionReport(
        model=describe(model),
        structure=[item1, item2, item3, item4],
        gamma=float(gamma),
        alpha=float(alpha),
        m=float(m),
        C_large=C_large,
        growth_ok=growth_ok,
        ell_gamma=ell,
        notes=notes,
    )
