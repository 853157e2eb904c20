"""Crossing analysis of the counter-monotonic quantile sum.

For a pair of marginals (X1, X2) the function

    g(u) = F1^{-1}(u) + F2^{-1}(1 - u),   u in (0, 1),

distributes like the counter-monotonic sum S = X1 + X2 under extreme
negative dependence.  This module evaluates g, locates its extrema, and
computes the crossing set E_x of a level x: the ordered points where g
passes through x, with jump diagnostics and the interpolation weights
that place x inside a jump.  The cdf and quantiles of the sum are then
assembled from the alternating structure of the crossing set.

Numerical care: g can jump only at probability levels where a marginal
quantile jumps (cdf atom levels).  Breakpoints mapped through u -> 1 - u
keep their exact atom level, because recomputing 1 - (1 - a) in floating
point can land on the wrong side of the jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CapExceeded, DegenerateSum, RangeError, UnresolvedOscillation
from .marginals import Marginal

__all__ = [
    "GPair",
    "CrossingPoint",
    "CrossingSet",
    "g_eval",
    "g_limits",
    "extrema",
    "crossing_set",
    "alpha_at",
    "sum_cdf",
    "sum_quantile",
]

BASE_GRID = 2**14 + 1
_EPS_DEGENERATE = 1e-12
_REFINE_TOL = 1e-12
_MAX_RETRIES = 2

UPCROSS = "upcross"
DOWNCROSS = "downcross"


@dataclass(frozen=True)
class CrossingPoint:
    """One element of E_x with the marginal quantiles at the crossing."""

    u: float
    g_left: float   # limit g(u-)
    g_right: float  # limit g(u+)
    g_at: float     # pointwise value g(u)
    direction: str  # "upcross" | "downcross"
    is_jump: bool
    alpha: float
    flat_onset: Optional[float]  # onset of a flat run at level x ending at u
    x1_left: float
    x1_right: float
    x2_left: float
    x2_right: float

    def to_dict(self) -> dict:
        return {
            "u": self.u,
            "g_left": self.g_left,
            "g_right": self.g_right,
            "g_at": self.g_at,
            "direction": self.direction,
            "is_jump": self.is_jump,
            "alpha": self.alpha,
            "flat_onset": self.flat_onset,
        }


@dataclass(frozen=True)
class CrossingSet:
    """The ordered crossing set E_x plus level-set bookkeeping.

    ``flat_mass`` is the total length of {u : g(u) = x} detected at grid
    resolution (the jump of the sum's cdf at x); ``extra_low_mass`` is the
    part of that set not already inside an alternating low interval.
    """

    x: float
    points: tuple[CrossingPoint, ...]
    initial_below: bool
    flat_mass: float = 0.0
    extra_low_mass: float = 0.0

    @property
    def n(self) -> int:
        return len(self.points)

    def low_measure(self) -> float:
        """Lebesgue measure of {u in (0,1) : g(u) <= x}.

        Low intervals open at a downcross (at the flat onset when a flat
        run at level x precedes it) and close at an upcross; flat runs not
        attached to any crossing enter through ``extra_low_mass``.
        """
        total = 0.0
        start: Optional[float] = 0.0 if self.initial_below else None
        for pt in self.points:
            if pt.direction == UPCROSS:
                total += pt.u - (start if start is not None else 0.0)
                start = None
            else:
                start = pt.flat_onset if pt.flat_onset is not None else pt.u
        if start is not None:
            total += 1.0 - start
        return min(1.0, total + self.extra_low_mass)

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "n": self.n,
            "initial_below": self.initial_below,
            "flat_mass": self.flat_mass,
            "points": [pt.to_dict() for pt in self.points],
        }


class _Grid:
    """Cached breakpoint-aware evaluation of g on a dense u-grid."""

    def __init__(self, first: Marginal, second: Marginal, clip: float, base_n: int):
        lo, hi = clip, 1.0 - clip
        lev1_exact: dict[float, float] = {}
        lev2_exact: dict[float, float] = {}
        for a in first.atoms(lo, hi):
            lev1_exact[a] = a
        for a in second.atoms(lo, hi):
            u = 1.0 - a
            if lo < u < hi:
                lev2_exact.setdefault(u, a)
        bp_us = sorted(set(lev1_exact) | set(lev2_exact))

        base = np.linspace(lo, hi, base_n)
        nodes = np.unique(np.concatenate([base, np.asarray(bp_us, dtype=float)]))
        self.nodes = nodes
        self.bp_idx = np.searchsorted(nodes, np.asarray(bp_us, dtype=float))

        levels1 = nodes.copy()
        levels2 = 1.0 - nodes
        for u in bp_us:
            i = int(np.searchsorted(nodes, u))
            if u in lev1_exact:
                levels1[i] = lev1_exact[u]
            if u in lev2_exact:
                levels2[i] = lev2_exact[u]

        q1l = first.quantile_left(levels1)
        q2l = second.quantile_left(levels2)
        q1r = q1l.copy()
        q2r = q2l.copy()
        if len(self.bp_idx):
            q1r[self.bp_idx] = first.quantile_right(levels1[self.bp_idx])
            q2r[self.bp_idx] = second.quantile_right(levels2[self.bp_idx])
        self.q1l, self.q1r, self.q2l, self.q2r = q1l, q1r, q2l, q2r
        self.g_at = q1l + q2l
        self.g_left = q1l + q2r   # g(u-)
        self.g_right = q1r + q2l  # g(u+)

        self._first, self._second = first, second
        self._refine_extrema()

    def g_scalar(self, u: float) -> float:
        return float(self._first.quantile_left(u)) + float(self._second.quantile_left(1.0 - u))

    def _refine_extrema(self) -> None:
        gl, gr, ga = self.g_left, self.g_right, self.g_at
        lo_pair = np.minimum(gr[:-1], gl[1:])
        hi_pair = np.maximum(gr[:-1], gl[1:])
        ncell = len(lo_pair)
        imin, imax = int(np.argmin(lo_pair)), int(np.argmax(hi_pair))
        cell_min = min(self._refine_cell(i, want_min=True)
                       for i in range(max(imin - 1, 0), min(imin + 2, ncell)))
        cell_max = max(self._refine_cell(i, want_min=False)
                       for i in range(max(imax - 1, 0), min(imax + 2, ncell)))
        self.ess_lo = min(float(lo_pair.min()), cell_min)
        self.ess_hi = max(float(hi_pair.max()), cell_max)
        self.x_min = min(self.ess_lo, float(ga.min()), float(gl.min()), float(gr.min()))
        self.x_max = max(self.ess_hi, float(ga.max()), float(gl.max()), float(gr.max()))
        scale = max(1.0, abs(self.ess_hi), abs(self.ess_lo))
        self.degenerate = (self.ess_hi - self.ess_lo) <= _EPS_DEGENERATE * scale

    def _refine_cell(self, i: int, want_min: bool) -> float:
        a, b = float(self.nodes[i]), float(self.nodes[i + 1])
        f = self.g_scalar
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(60):
            if b - a <= 1e-14:
                break
            if (fc < fd) == want_min:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = f(d)
        return min(fc, fd) if want_min else max(fc, fd)


@dataclass
class GPair:
    """An ordered pair of marginals driving the counter-monotonic sum."""

    first: Marginal
    second: Marginal
    clip: float = 1e-9
    _grids: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.clip < 0.01:
            raise ValueError(f"clip outside (0, 0.01): {self.clip!r}")

    def grid(self, base_n: int = BASE_GRID) -> _Grid:
        if base_n not in self._grids:
            self._grids[base_n] = _Grid(self.first, self.second, self.clip, base_n)
        return self._grids[base_n]

    def to_dict(self) -> dict:
        return {
            "marginal1": self.first.to_descriptor(),
            "marginal2": self.second.to_descriptor(),
            "clip": self.clip,
        }


def g_eval(pair: GPair, u):
    """g(u) = F1^{-1}(u) + F2^{-1}(1-u); accepts a float or an ndarray."""
    return pair.first.quantile_left(u) + pair.second.quantile_left(
        1.0 - np.asarray(u, dtype=float)
    )


def g_limits(pair: GPair, u: float) -> tuple[float, float]:
    """One-sided limits (g(u-), g(u+)).

    g(u-) = F1^{-1}(u) + F2^{-1+}(1-u) and g(u+) = F1^{-1+}(u) + F2^{-1}(1-u)
    by left-continuity of the left inverses.  The level 1-u is formed in
    floating point here; exact atom levels are used internally by
    crossing_set where the distinction matters.
    """
    v = 1.0 - u
    g_minus = pair.first.quantile_left(u) + pair.second.quantile_right(v)
    g_plus = pair.first.quantile_right(u) + pair.second.quantile_left(v)
    return float(g_minus), float(g_plus)


def extrema(pair: GPair) -> tuple[float, float]:
    """(x_min, x_max): pointwise inf/sup of g over [clip, 1-clip].

    Raises DegenerateSum when g carries no essential variation (the sum
    is numerically constant).
    """
    grid = pair.grid()
    if grid.degenerate:
        raise DegenerateSum("counter-monotonic sum is numerically constant")
    return grid.x_min, grid.x_max


def alpha_at(point: CrossingPoint, x: float) -> float:
    """Interpolation weight placing x inside the jump of g at the crossing;
    zero when g is continuous there."""
    if not point.is_jump or point.g_right == point.g_left:
        return 0.0
    a = (x - point.g_left) / (point.g_right - point.g_left)
    return min(max(a, 0.0), 1.0)


def _bisect_sign_change(f, lo: float, hi: float, s_lo: int,
                        zero_tol: float) -> tuple[float, float]:
    """Bracket of the sign change of f on (lo, hi); values within zero_tol
    of zero count as the incoming side, so the bracket closes on the
    terminal point of any sub-resolution flat run at the level."""
    for _ in range(80):
        if hi - lo <= _REFINE_TOL:
            break
        mid = 0.5 * (lo + hi)
        v = f(mid)
        if abs(v) <= zero_tol or (v < 0.0) == (s_lo < 0):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _bisect_band_edge(f, lo: float, hi: float, flat_tol: float, inside_left: bool) -> float:
    """Edge of the band {|f| <= flat_tol} inside (lo, hi); ``inside_left``
    says whether f(lo) lies inside the band."""
    for _ in range(80):
        if hi - lo <= _REFINE_TOL:
            break
        mid = 0.5 * (lo + hi)
        if (abs(f(mid)) <= flat_tol) == inside_left:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _point_from_node(grid: _Grid, i: int, x: float, direction: str,
                     flat_tol: float, flat_onset: Optional[float]) -> CrossingPoint:
    gl, gr = float(grid.g_left[i]), float(grid.g_right[i])
    is_jump = abs(gr - gl) > flat_tol
    alpha = min(max((x - gl) / (gr - gl), 0.0), 1.0) if is_jump else 0.0
    return CrossingPoint(
        u=float(grid.nodes[i]),
        g_left=gl,
        g_right=gr,
        g_at=float(grid.g_at[i]),
        direction=direction,
        is_jump=is_jump,
        alpha=alpha,
        flat_onset=flat_onset,
        x1_left=float(grid.q1l[i]),
        x1_right=float(grid.q1r[i]),
        x2_left=float(grid.q2l[i]),
        x2_right=float(grid.q2r[i]),
    )


def _point_continuous(pair: GPair, u: float, direction: str,
                      flat_onset: Optional[float]) -> CrossingPoint:
    x1 = float(pair.first.quantile_left(u))
    x2 = float(pair.second.quantile_left(1.0 - u))
    return CrossingPoint(
        u=u, g_left=x1 + x2, g_right=x1 + x2, g_at=x1 + x2,
        direction=direction, is_jump=False, alpha=0.0, flat_onset=flat_onset,
        x1_left=x1, x1_right=x1, x2_left=x2, x2_right=x2,
    )


def _value_bisect(h, a: float, b: float) -> float:
    ha = h(a)
    for _ in range(80):
        if b - a <= 1e-15 * max(1.0, abs(a), abs(b)):
            break
        mid = 0.5 * (a + b)
        if (h(mid) < 0.0) == (ha < 0.0):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _point_continuous_polished(pair: GPair, u_lo: float, u_hi: float, x: float,
                               direction: str) -> CrossingPoint:
    """Continuous crossing from a refined u-bracket, polished in value space.

    In a steep quantile tail the u axis cannot localise g closer to x than
    eps * |g'|, so when the pointwise residual matters it is removed by
    bisecting the retention of whichever marginal varies more across the
    bracket (the other's retention follows through the cdf).
    """
    F1, F2 = pair.first, pair.second
    u = 0.5 * (u_lo + u_hi)
    x1 = float(F1.quantile_left(u))
    x2 = float(F2.quantile_left(1.0 - u))
    if abs(x1 + x2 - x) > 1e-11 * max(1.0, abs(x)):
        r1_span = float(F1.quantile_left(u_hi)) - float(F1.quantile_left(u_lo))
        r2_span = float(F2.quantile_left(1.0 - u_lo)) - float(F2.quantile_left(1.0 - u_hi))
        if r1_span >= r2_span:
            a = float(F1.quantile_left(u_lo))
            b = float(F1.quantile_left(u_hi))
            x1 = _value_bisect(
                lambda r: r + float(F2.quantile_left(1.0 - float(F1.cdf(r)))) - x,
                min(a, b), max(a, b))
            u = min(max(float(F1.cdf(x1)), u_lo), u_hi)
            x2 = float(F2.quantile_left(1.0 - u))
        else:
            a = float(F2.quantile_left(1.0 - u_hi))
            b = float(F2.quantile_left(1.0 - u_lo))
            x2 = _value_bisect(
                lambda r: float(F1.quantile_left(1.0 - float(F2.cdf(r)))) + r - x,
                min(a, b), max(a, b))
            u = min(max(1.0 - float(F2.cdf(x2)), u_lo), u_hi)
            x1 = float(F1.quantile_left(u))
    return CrossingPoint(
        u=u, g_left=x1 + x2, g_right=x1 + x2, g_at=x1 + x2,
        direction=direction, is_jump=False, alpha=0.0, flat_onset=None,
        x1_left=x1, x1_right=x1, x2_left=x2, x2_right=x2,
    )


def _scan_fast(pair: GPair, grid: _Grid, x: float, flat_tol: float):
    """Sign scan when no grid value lies inside the flat band at x."""
    nodes = grid.nodes
    sL = np.sign(grid.g_left - x).astype(np.int8)
    sR = np.sign(grid.g_right - x).astype(np.int8)
    f = lambda u: grid.g_scalar(u) - x
    sign_tol = 1e-13 * max(1.0, abs(x))

    points: list[CrossingPoint] = []
    for i in np.nonzero(sL * sR == -1)[0]:
        direction = UPCROSS if sL[i] < 0 else DOWNCROSS
        points.append(_point_from_node(grid, int(i), x, direction, flat_tol, None))
    for i in np.nonzero(sR[:-1] * sL[1:] == -1)[0]:
        direction = UPCROSS if sR[i] < 0 else DOWNCROSS
        lo, hi = _bisect_sign_change(f, float(nodes[i]), float(nodes[i + 1]),
                                     int(sR[i]), sign_tol)
        points.append(_point_continuous_polished(pair, lo, hi, x, direction))
    points.sort(key=lambda p: p.u)
    return points, bool(sR[0] < 0), 0.0, 0.0


def _scan_with_flats(pair: GPair, grid: _Grid, x: float, flat_tol: float):
    """Full state walk handling flat runs of g at level x.

    The state sequence alternates node left-limits and right-limits; the
    open interval between nodes connects a right-limit to the next
    left-limit.  Maximal zero-sign runs are resolved per the crossing-set
    definition: a run flanked by opposite signs yields one crossing at the
    run's terminal point (its onset kept as flat_onset); a run flanked by
    equal signs is a touch and yields none, but still belongs to {g = x}.
    """
    nodes = grid.nodes
    n = len(nodes)
    gl = grid.g_left - x
    gr = grid.g_right - x
    sL = np.where(np.abs(gl) <= flat_tol, 0, np.sign(gl)).astype(np.int8)
    sR = np.where(np.abs(gr) <= flat_tol, 0, np.sign(gr)).astype(np.int8)
    f = lambda u: grid.g_scalar(u) - x
    sign_tol = 1e-13 * max(1.0, abs(x))

    seq = np.empty(2 * n, dtype=np.int8)
    seq[0::2] = sL  # even j: left limit of node j//2
    seq[1::2] = sR  # odd  j: right limit of node j//2

    points: list[CrossingPoint] = []
    flat_mass = 0.0
    extra_low = 0.0
    initial_below: Optional[bool] = None
    prev_sign = 0
    prev_j = -1
    run_start: Optional[int] = None

    def run_onset(j0: int) -> float:
        i, side = j0 // 2, j0 % 2
        if j0 == 0:
            return float(nodes[0])
        if side == 1:
            # run starts at node i's right limit: a jump lands on the band
            return float(nodes[i])
        # run starts at node i's left limit: band entered inside (i-1, i)
        return _bisect_band_edge(f, float(nodes[i - 1]), float(nodes[i]), flat_tol, False)

    def run_exit(j1: int) -> tuple[float, Optional[int]]:
        i, side = j1 // 2, j1 % 2
        if side == 0:
            # run ends at node i's left limit: band left by the node's jump
            return float(nodes[i]), i
        # run ends at node i's right limit: band left inside (i, i+1)
        return _bisect_band_edge(f, float(nodes[i]), float(nodes[i + 1]), flat_tol, True), None

    def close_run(j_last_zero: int, after_sign: int) -> None:
        nonlocal flat_mass, extra_low
        onset = run_onset(run_start)
        end_u, exit_node = run_exit(j_last_zero)
        extent = max(end_u - onset, 0.0)
        flat_mass += extent
        before = prev_sign if prev_j >= 0 else 0
        if before != 0 and before != after_sign:
            direction = UPCROSS if after_sign > 0 else DOWNCROSS
            onset_out = onset if extent > _REFINE_TOL else None
            if exit_node is not None:
                points.append(_point_from_node(grid, exit_node, x, direction, flat_tol, onset_out))
            else:
                points.append(_point_continuous(pair, end_u, direction, onset_out))
        elif before != -1 and after_sign != -1:
            extra_low += extent  # touch/edge run not inside any low interval

    for j in range(2 * n):
        s = int(seq[j])
        if s == 0:
            if run_start is None:
                run_start = j
            continue
        if initial_below is None:
            initial_below = s < 0
        if run_start is not None:
            close_run(j - 1, s)
            run_start = None
        elif prev_j >= 0 and prev_sign != s:
            direction = UPCROSS if prev_sign < 0 else DOWNCROSS
            i_prev, i_cur = prev_j // 2, j // 2
            if i_prev == i_cur:
                points.append(_point_from_node(grid, i_cur, x, direction, flat_tol, None))
            else:
                lo, hi = _bisect_sign_change(
                    f, float(nodes[i_prev]), float(nodes[i_cur]), prev_sign, sign_tol
                )
                points.append(_point_continuous_polished(pair, lo, hi, x, direction))
        prev_sign, prev_j = s, j

    if run_start is not None:  # run reaches the domain end
        onset = run_onset(run_start)
        extent = max(float(nodes[-1]) - onset, 0.0)
        flat_mass += extent
        if prev_j >= 0 and prev_sign == 1:
            extra_low += extent
    points.sort(key=lambda p: p.u)
    return points, bool(initial_below), flat_mass, extra_low


def _validate_alternation(points: list[CrossingPoint], initial_below: bool) -> bool:
    want = UPCROSS if initial_below else DOWNCROSS
    for pt in points:
        if pt.direction != want:
            return False
        want = DOWNCROSS if want == UPCROSS else UPCROSS
    return True


def _build_crossing_set(pair: GPair, x: float, max_crossings: int) -> CrossingSet:
    flat_tol = 1e-9 * max(1.0, abs(x))
    base_n = BASE_GRID
    for _ in range(_MAX_RETRIES + 1):
        g = pair.grid(base_n)
        has_zero = bool(
            np.any(np.abs(g.g_left - x) <= flat_tol)
            or np.any(np.abs(g.g_right - x) <= flat_tol)
        )
        scan = _scan_with_flats if has_zero else _scan_fast
        points, initial_below, flat_mass, extra_low = scan(pair, g, x, flat_tol)
        if len(points) > max_crossings:
            raise CapExceeded(f"{len(points)} crossings exceed cap {max_crossings}")
        inside_essential = g.ess_lo < x < g.ess_hi
        explained = bool(points) or not inside_essential or flat_mass > 0.0
        if _validate_alternation(points, initial_below) and explained:
            return CrossingSet(
                x=x,
                points=tuple(points),
                initial_below=initial_below,
                flat_mass=flat_mass,
                extra_low_mass=extra_low,
            )
        base_n = 4 * (base_n - 1) + 1
    raise UnresolvedOscillation(
        f"crossing structure at x={x!r} did not stabilise at grid size {base_n}"
    )


def crossing_set(pair: GPair, x: float, max_crossings: int = 10_000) -> CrossingSet:
    """The crossing set E_x of the level x, per its defining conditions.

    Sign changes of g - x are located on a breakpoint-aware grid and
    refined by bisection; jump crossings are detected from one-sided
    limits at marginal atom levels; flat runs at level x contribute only
    their terminal point, and touch-without-cross points are excluded.
    """
    grid = pair.grid()
    if grid.degenerate:
        raise DegenerateSum("counter-monotonic sum is numerically constant")
    if not grid.x_min < x < grid.x_max:
        raise RangeError(
            f"level {x!r} outside the attainable range ({grid.x_min!r}, {grid.x_max!r})"
        )
    return _build_crossing_set(pair, x, max_crossings)


def sum_cdf(pair: GPair, x: float) -> float:
    """cdf of the counter-monotonic sum: the measure of {u : g(u) <= x}."""
    grid = pair.grid()
    if grid.degenerate:
        raise DegenerateSum("counter-monotonic sum is numerically constant")
    if x < grid.x_min:
        return 0.0
    if x >= grid.x_max:
        return 1.0
    return _build_crossing_set(pair, x, 10_000).low_measure()


def sum_quantile(pair: GPair, p: float, alpha: float = 0.0) -> float:
    """Generalized alpha-inverse of the counter-monotonic sum's cdf.

    Monotone bisection of sum_cdf to an absolute x-tolerance of
    1e-10 * (x_max - x_min), combining left and right inverses.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"level outside (0, 1): {p!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha outside [0, 1]: {alpha!r}")
    grid = pair.grid()
    if grid.degenerate:
        raise DegenerateSum("counter-monotonic sum is numerically constant")
    tol = 1e-10 * (grid.x_max - grid.x_min)

    def left_inverse() -> float:
        lo, hi = grid.x_min, grid.x_max
        if sum_cdf(pair, lo) >= p:
            return lo
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if sum_cdf(pair, mid) >= p:
                hi = mid
            else:
                lo = mid
        return hi

    def right_inverse() -> float:
        lo, hi = grid.x_min, grid.x_max
        if sum_cdf(pair, lo) > p:
            return lo
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if sum_cdf(pair, mid) <= p:
                lo = mid
            else:
                hi = mid
        return lo

    if alpha == 0.0:
        return left_inverse()
    if alpha == 1.0:
        return right_inverse()
    return (1.0 - alpha) * left_inverse() + alpha * right_inverse()
