"""Grid-bracketed golden-section search, coordinate descent, bisection and
saddle-point location for absorption-time objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .solver import NonAbsorbingError

INV_PHI = (math.sqrt(5) - 1) / 2
UPPER_GUARD = 1e-6
TIE_TOL = 1e-12
FD_STEP = 1e-6


class BracketError(ValueError):
    """The root-finding interval does not bracket a sign change."""


@dataclass
class OptResult:
    argmin: float | tuple[float, ...]
    value: float
    bracket: float
    evaluations: int

    def to_dict(self) -> dict:
        arg = list(self.argmin) if isinstance(self.argmin, tuple) else self.argmin
        return {
            "argmin": arg,
            "value": self.value,
            "bracket": self.bracket,
            "evaluations": self.evaluations,
        }


class _Counted:
    """Wraps an objective: counts calls, maps non-absorbing/NaN to +inf."""

    def __init__(self, f: Callable[..., float]):
        self.f = f
        self.calls = 0
        self.last_error: Exception | None = None

    def __call__(self, *x) -> float:
        self.calls += 1
        try:
            v = float(self.f(*x))
        except NonAbsorbingError as exc:
            self.last_error = exc
            return math.inf
        return v if not math.isnan(v) else math.inf


def _grid(lo: float, hi: float, step: float, guard: float) -> np.ndarray:
    n = max(1, int(round((hi - lo) / step)))
    xs = np.linspace(lo, hi, n + 1)
    if guard:
        xs[-1] = hi - guard
    return xs


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float):
    """Shrink ``[a, b]`` around a minimum of ``f`` to width ``tol``.

    Returns ``(x_best, f_best, width)`` where the best point is the lowest
    value seen, endpoints included.
    """
    fa, fb = f(a), f(b)
    best = min((fa, a), (fb, b))
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
        best = min(best, (f1, x1), (f2, x2))
    return best[1], best[0], b - a


def minimize_scalar(
    objective: Callable[[float], float],
    lo: float = 0.0,
    hi: float = 1.0,
    tol: float = 1e-8,
    grid_step: float = 1e-3,
    guard: float | None = None,
    batch: Callable[[np.ndarray], np.ndarray] | None = None,
) -> OptResult:
    """Global-ish minimum on ``[lo, hi]``: grid scan, then golden refinement.

    The last grid point is pulled in by ``guard`` (default 1e-6 when
    ``hi >= 1``) since laziness 1 freezes the walk. Points where the objective
    raises :class:`NonAbsorbingError` count as ``+inf``. Ties within 1e-12
    go to the leftmost grid cell. ``batch`` (optional) evaluates the whole
    grid in one call and must agree with ``objective``.
    """
    if tol < 1e-10:
        raise ValueError(f"tol must be >= 1e-10, got {tol}")
    if guard is None:
        guard = UPPER_GUARD if hi >= 1.0 else 0.0
    f = _Counted(objective)
    xs = _grid(lo, hi, grid_step, guard)
    if batch is not None:
        fs = np.asarray(batch(xs), dtype=float)
        fs[np.isnan(fs)] = np.inf
        f.calls += len(xs)
    else:
        fs = np.array([f(x) for x in xs])
    if not np.isfinite(fs).any():
        if f.last_error is not None:
            raise f.last_error
        raise ValueError("objective is not finite anywhere on the grid")
    fmin = fs.min()
    i = int(np.flatnonzero(fs <= fmin + TIE_TOL)[0])
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, len(xs) - 1)]
    x, fx, width = golden_section(f, a, b, tol)
    if fx > fs[i]:
        x = xs[i]
    value = f(x)
    return OptResult(float(x), value, float(width), f.calls)


def minimize_2d(
    objective: Callable[[float, float], float],
    box: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 1.0), (0.0, 1.0)),
    tol: float = 1e-8,
    lattice: int = 101,
    grid_step: float = 1e-3,
    max_rounds: int = 100,
    batch: Callable[[np.ndarray], np.ndarray] | None = None,
) -> OptResult:
    """Lattice scan then cyclic coordinate descent with :func:`minimize_scalar`.

    ``batch`` (optional) maps an ``(N, 2)`` array of points to values and is
    used for the lattice and the coordinate grid scans.
    """
    f = _Counted(objective)
    (xlo, xhi), (ylo, yhi) = box
    gx = _grid(xlo, xhi, (xhi - xlo) / (lattice - 1), UPPER_GUARD if xhi >= 1 else 0.0)
    gy = _grid(ylo, yhi, (yhi - ylo) / (lattice - 1), UPPER_GUARD if yhi >= 1 else 0.0)
    if batch is not None:
        pts = np.array([(x, y) for x in gx for y in gy])
        vals = np.asarray(batch(pts), dtype=float).reshape(len(gx), len(gy))
        vals[np.isnan(vals)] = np.inf
        f.calls += vals.size
    else:
        vals = np.array([[f(x, y) for y in gy] for x in gx])
    if not np.isfinite(vals).any():
        if f.last_error is not None:
            raise f.last_error
        raise ValueError("objective is not finite anywhere on the lattice")
    flat = int(np.flatnonzero(vals.ravel() <= vals.min() + TIE_TOL)[0])
    ix, iy = divmod(flat, len(gy))
    x, y, fxy = float(gx[ix]), float(gy[iy]), float(vals[ix, iy])
    width = max(gx[1] - gx[0], gy[1] - gy[0])
    for _ in range(max_rounds):
        bx = by = None
        if batch is not None:
            bx = lambda us, y=y: batch(np.column_stack([us, np.full(len(us), y)]))
        rx = minimize_scalar(lambda u: f(u, y), xlo, xhi, tol, grid_step, batch=bx)
        gain_x = fxy - rx.value
        if gain_x > 0:
            x, fxy = rx.argmin, rx.value
        if batch is not None:
            by = lambda vs, x=x: batch(np.column_stack([np.full(len(vs), x), vs]))
        ry = minimize_scalar(lambda v: f(x, v), ylo, yhi, tol, grid_step, batch=by)
        gain_y = fxy - ry.value
        if gain_y > 0:
            y, fxy = ry.argmin, ry.value
        width = max(rx.bracket, ry.bracket)
        if gain_x < tol and gain_y < tol:
            break
    value = f(x, y)
    return OptResult((x, y), value, float(width), f.calls)


def find_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Bisection to an interval of width ``tol``; returns the midpoint."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo:.3g}, {fhi:.3g}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gradient(T: Callable[[float, float], float], h: float, s: float, step: float = FD_STEP):
    gh = (T(h + step, s) - T(h - step, s)) / (2 * step)
    gs = (T(h, s + step) - T(h, s - step)) / (2 * step)
    return np.array([gh, gs])


def hessian(T: Callable[[float, float], float], h: float, s: float, step: float = 1e-4) -> np.ndarray:
    f0 = T(h, s)
    hh = (T(h + step, s) - 2 * f0 + T(h - step, s)) / step**2
    ss = (T(h, s + step) - 2 * f0 + T(h, s - step)) / step**2
    hs = (
        T(h + step, s + step) - T(h + step, s - step)
        - T(h - step, s + step) + T(h - step, s - step)
    ) / (4 * step**2)
    return np.array([[hh, hs], [hs, ss]])


@dataclass
class SaddleResult:
    h_star: float
    s_star: float
    value: float
    gradient_norm: float
    hessian_det: float
    indifference_root: float
    max_over_h: float
    min_over_s: float
    hider_violation: float
    searcher_violation: float
    certified: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _stationary_point(T, h, s, lo, hi, tol=1e-10, max_iter=60):
    """Damped Newton on the finite-difference gradient, kept inside the box."""
    g = gradient(T, h, s)
    for _ in range(max_iter):
        gn = np.abs(g).max()
        if gn <= tol:
            break
        H = hessian(T, h, s)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            hn = min(max(h - t * step[0], lo), hi)
            sn = min(max(s - t * step[1], lo), hi)
            gnew = gradient(T, hn, sn)
            if np.abs(gnew).max() < gn:
                h, s, g = hn, sn, gnew
                break
            t /= 2
        else:
            break
    return h, s


def find_saddle(
    T: Callable[[float, float], float],
    tol: float = 1e-12,
    lo: float = 0.0,
    hi: float = 1.0,
    grid: int = 101,
    slack: float = 1e-6,
) -> SaddleResult:
    """Saddle point of a hider-max / searcher-min payoff ``T(h, s)``.

    The searcher parameter is first pinned by hider indifference between the
    extremes, ``T(lo, s) = T(hi, s)`` (or a coarse minimax when no such ``s``
    exists). The hider's best reply there seeds a
    damped Newton search for the stationary point. The result carries a grid
    certificate: ``T(h, s*) <= V + slack`` for all ``h`` and
    ``T(h*, s) >= V - slack`` for all ``s``.
    """
    top = hi - UPPER_GUARD if hi >= 1.0 else hi
    notes = []
    try:
        s0 = find_root(lambda s: T(lo, s) - T(top, s), lo, top, tol)
        root = s0
    except BracketError:
        notes.append("hider never indifferent between extremes; seeded from minimax grid")
        coarse = _grid(lo, hi, (hi - lo) / 20, UPPER_GUARD if hi >= 1 else 0.0)
        s0 = minimize_scalar(lambda s: max(T(x, s) for x in coarse), lo, hi, 1e-6, 1e-2).argmin
        root = math.nan
    h0 = minimize_scalar(lambda h: -T(h, s0), lo, hi).argmin
    margin = 2e-4
    h, s = _stationary_point(
        T, min(max(h0, lo + margin), top - margin), s0, lo + margin, top - margin
    )
    g = gradient(T, h, s)
    if np.abs(g).max() > slack:
        notes.append("no stationary point found; reporting indifference point")
        h, s, g = h0, s0, gradient(T, h0, s0)
    value = T(h, s)
    pts = _grid(lo, hi, (hi - lo) / (grid - 1), UPPER_GUARD if hi >= 1 else 0.0)
    max_h = max(T(x, s) for x in pts)
    min_s = min(T(h, x) for x in pts)
    hider_v = max(0.0, max_h - value)
    searcher_v = max(0.0, value - min_s)
    certified = hider_v <= slack and searcher_v <= slack
    if not certified:
        notes.append("saddle certificate violated on the verification grid")
    return SaddleResult(
        h_star=float(h),
        s_star=float(s),
        value=float(value),
        gradient_norm=float(np.abs(g).max()),
        hessian_det=float(np.linalg.det(hessian(T, h, s))),
        indifference_root=float(root),
        max_over_h=float(max_h),
        min_over_s=float(min_s),
        hider_violation=float(hider_v),
        searcher_violation=float(searcher_v),
        certified=bool(certified),
        notes=notes,
    )
