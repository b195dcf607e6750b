"""Degeneracy-adapted frequency geometry.

Rescaled coordinates: the linear map L(x) = (v_1 x_1, ..., v_n x_n) sends
the diagonal onto the singular line span(v), so all cube geometry lives in
rescaled space where the Whitney conditions are relative to the diagonal.
Cube centers and interval endpoints are exact dyadic rationals; the
adjusted ("good dyadic") intervals are exact rationals.

Scale convention: a cube of scale exponent j has sidelength 2^j in
rescaled coordinates; only j that are multiples of K are generated, so the
frequency parameter j_Q = j/K is an integer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dyadic import Interval, frac, hull_of
from .profiles import plateau

ADJ_BASE = 1000        # adjusted interval = ADJ_BASE * Q_i, enlarged <= 1% per side
ADJ_BUDGET = Fraction(1, 100)
HULL_DILATE = 10       # the dyadic lemma is stated for HULL_DILATE * adjusted
TOP_RADIUS = 500       # tree top window = [s - TOP_RADIUS/|I|, s + TOP_RADIUS/|I|]


class GeometryError(ValueError):
    pass


class AdjustmentError(GeometryError):
    """No admissible adjusted-interval endpoint within the 1% budget."""


@dataclass(frozen=True)
class GridConstants:
    """Desk-scale stand-ins for the paper-scale decomposition constants.

    C0 controls Whitney fineness, K the scale separation (all dyadic
    lengths are powers of 2^K), Ndecay the physical-space decay order.
    `lattice` is the center-lattice fineness g (centers on 2^(j-g) Z^n);
    `eta_fraction` the spectral radius of the eta kernel at scale j as a
    fraction of 2^(K j).  Both are desk-scale reductions of constants the
    source analysis ties to astronomically large K.
    """

    C0: int = 2
    K: int = 4
    Ndecay: int = 8
    lattice: int = 2
    eta_fraction: Fraction = Fraction(1, 4)

    def __post_init__(self):
        if self.C0 < 2:
            raise GeometryError(f"C0 must be >= 2, got {self.C0}")
        if self.K < 2:
            raise GeometryError(f"K must be >= 2, got {self.K}")
        if self.Ndecay < 4:
            raise GeometryError(f"Ndecay must be >= 4, got {self.Ndecay}")
        if self.lattice < 0:
            raise GeometryError("lattice exponent must be >= 0")

    @property
    def scale_step(self) -> int:
        return 1 << self.K

    def multi_scale_ok(self) -> bool:
        """Whether an adjusted interval at the next scale up is strictly
        wider than a worst-case hull, so cross-scale families are usable."""
        worst_hull = HULL_DILATE * ADJ_BASE * (1 + 2 * ADJ_BUDGET) + 8 * self.C0
        return ADJ_BASE * self.scale_step > worst_hull


class DegeneracyVector:
    """Direction vector v of the singular line, normalized and sorted.

    After construction: |v[0]| >= ... >= |v[n-1]| = 1, sum(v) = 0 and all
    components nonzero.  `perm[i]` is the position of sorted slot i in the
    input vector, so v_sorted[i] == v_input[perm[i]] / scale.
    """

    def __init__(self, components):
        comps = [frac(c) if isinstance(c, (int, Fraction)) else float(c) for c in components]
        n = len(comps)
        if n < 3:
            raise GeometryError(f"arity must be >= 3, got {n}")
        exact = all(isinstance(c, Fraction) for c in comps)
        vals = [Fraction(c) if exact else float(c) for c in comps]
        if any(c == 0 for c in vals):
            raise GeometryError("all components of v must be nonzero")
        total = sum(vals)
        scale0 = max(abs(c) for c in vals)
        bad = (total != 0) if exact else (abs(total) > 1e-12 * float(scale0))
        if bad:
            raise GeometryError(f"components must sum to zero, got {total}")
        order = sorted(range(n), key=lambda i: (-abs(vals[i]), i))
        scale = abs(vals[order[-1]])
        sorted_vals = [vals[i] / scale for i in order]

        self.n = n
        self.perm = tuple(order)
        self.scale = scale
        self.v_exact = tuple(sorted_vals) if exact else None
        self.v = np.array([float(c) for c in sorted_vals])
        self.M = np.log2(np.abs(self.v))
        self.M_int = None
        if exact:
            logs = [_exact_log2(abs(c)) for c in sorted_vals]
            if all(l is not None for l in logs):
                self.M_int = tuple(logs)

    @classmethod
    def from_beta(cls, beta):
        b = list(beta)
        if len(b) != 3:
            raise GeometryError("beta parameterization is for n = 3")
        if len({float(x) for x in b}) != 3:
            raise GeometryError("beta components must be pairwise distinct")
        return cls([b[1] - b[2], b[2] - b[0], b[0] - b[1]])

    def m_exponents(self, gc: GridConstants) -> np.ndarray:
        return self.M / gc.K

    def degeneracy_ratio(self) -> float:
        return float(abs(self.v[0]))

    def component_exact(self, i: int) -> Fraction:
        if self.v_exact is None:
            raise GeometryError("vector was built from inexact components")
        return self.v_exact[i]

    def __repr__(self):
        return f"DegeneracyVector({list(self.v)})"


def _exact_log2(x: Fraction):
    p, q = x.numerator, x.denominator
    if p & (p - 1) == 0 and q & (q - 1) == 0:
        return p.bit_length() - q.bit_length()
    return None


def dv_distance(x, y, v, tol: float = 1e-9) -> float:
    """Metric d_v(x, y) = sup_i |x_i - y_i| / |v_i| between points of the
    frequency hyperplane (coordinates summing to zero)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vv = v.v if isinstance(v, DegeneracyVector) else np.asarray(v, dtype=float)
    if np.any(vv == 0):
        raise GeometryError("v has a zero component")
    scale = max(1.0, np.max(np.abs(x)), np.max(np.abs(y)))
    if abs(x.sum()) > tol * scale or abs(y.sum()) > tol * scale:
        raise GeometryError("points must lie on the hyperplane sum(xi) = 0")
    return float(np.max(np.abs(x - y) / np.abs(vv)))


def dv_distance_to_line(x, v, tol: float = 1e-9) -> float:
    """Distance d_v(x, span(v)) = inf_s sup_i |x_i - s v_i| / |v_i|.

    Each term |x_i/v_i - s| is piecewise linear in s with unit slope, so
    the infimum is attained midway between the extreme x_i/v_i.
    """
    x = np.asarray(x, dtype=float)
    vv = v.v if isinstance(v, DegeneracyVector) else np.asarray(v, dtype=float)
    if np.any(vv == 0):
        raise GeometryError("v has a zero component")
    scale = max(1.0, np.max(np.abs(x)))
    if abs(x.sum()) > tol * scale:
        raise GeometryError("point must lie on the hyperplane sum(xi) = 0")
    u = x / vv
    return float((u.max() - u.min()) / 2)


def rescale(x, v, direction: str = "forward"):
    """The linear change of variables L: forward multiplies coordinate i
    by v_i, inverse divides.  inverse maps span(v) onto the diagonal."""
    vv = v.v if isinstance(v, DegeneracyVector) else np.asarray(v, dtype=float)
    x = np.asarray(x, dtype=float)
    if direction == "forward":
        return x * vv
    if direction == "inverse":
        return x / vv
    raise GeometryError(f"direction must be forward or inverse, got {direction!r}")


class Cube:
    """Axis-parallel cube in rescaled frequency space.

    j is the scale exponent (sidelength 2^j), the center is an exact
    point on the lattice 2^(j - g) Z^n.  `adjusted` holds the enlarged
    good-dyadic intervals once built.
    """

    __slots__ = ("j", "center", "adjusted")

    def __init__(self, j: int, center, adjusted=None):
        self.j = j
        self.center = tuple(frac(c) for c in center)
        self.adjusted = adjusted

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def side(self) -> Fraction:
        return Fraction(2) ** self.j

    def interval(self, i: int) -> Interval:
        h = self.side / 2
        return Interval(self.center[i] - h, self.center[i] + h)

    def diag_dist(self) -> Fraction:
        """Sup-metric distance of the center to the diagonal:
        (max_i c_i - min_i c_i) / 2, exact."""
        return (max(self.center) - min(self.center)) / 2

    def diag_slot(self) -> Fraction:
        return min(self.center)

    def hull(self) -> Interval:
        """Convex hull of the HULL_DILATE-dilated adjusted intervals."""
        if self.adjusted is None:
            raise GeometryError("adjusted intervals not built")
        return hull_of(iv.dilate(HULL_DILATE) for iv in self.adjusted)

    def potential_hull(self) -> Interval:
        """Worst-case hull bound valid for any admissible adjustment."""
        r = self.side * ADJ_BASE * (1 + 2 * ADJ_BUDGET) * HULL_DILATE / 2
        return Interval(min(self.center) - r, max(self.center) + r)

    def key(self):
        return (-self.j, self.center)

    def __eq__(self, other):
        return isinstance(other, Cube) and self.j == other.j and self.center == other.center

    def __hash__(self):
        return hash((self.j, self.center))

    def __repr__(self):
        c = ", ".join(str(x) for x in self.center)
        return f"Cube(j={self.j}, center=({c}))"


def whitney_conditions(center, j: int, gc: GridConstants) -> tuple[bool, bool]:
    """Exact evaluation of the two Whitney conditions for a cube:
    C0-dilate misses the diagonal, 4C0-dilate meets it.

    A dilate A*Q meets the diagonal iff the center's sup-distance to the
    diagonal is <= A * side / 2.
    """
    c = [frac(x) for x in center]
    d = (max(c) - min(c)) / 2
    side = Fraction(2) ** j
    cond1 = d > Fraction(gc.C0) * side / 2
    cond2 = d <= 2 * Fraction(gc.C0) * side
    return cond1, cond2


def is_whitney(center, j: int, gc: GridConstants) -> bool:
    c1, c2 = whitney_conditions(center, j, gc)
    return c1 and c2


def generate_whitney_cubes(bounds, scale_range, gc: GridConstants, n: int = 3) -> list[Cube]:
    """All Whitney cubes with centers inside `bounds`.

    bounds: an Interval applied to every coordinate, or one Interval per
    coordinate.  scale_range: (j_min, j_max) in rescaled exponents; only
    multiples of K are used so frequency parameters stay integral.
    """
    if isinstance(bounds, Interval):
        bounds = [bounds] * n
    bounds = list(bounds)
    if len(bounds) != n:
        raise GeometryError("bounds arity mismatch")
    j_min, j_max = scale_range
    if j_min > j_max:
        raise GeometryError("empty scale range")
    cubes = []
    for j in range(j_min, j_max + 1):
        if j % gc.K != 0:
            continue
        cubes.extend(_cubes_at_scale(bounds, j, gc, n))
    cubes.sort(key=Cube.key)
    return cubes


def _cubes_at_scale(bounds, j, gc, n):
    step = Fraction(2) ** (j - gc.lattice)
    # in lattice units the Whitney conditions read
    #   C0 * 2^g < (max k - min k) <= 4 * C0 * 2^g
    d2_lo = gc.C0 << gc.lattice
    d2_hi = 4 * gc.C0 << gc.lattice
    k_ranges = []
    for iv in bounds:
        kmin = math.ceil(iv.a / step)
        kmax = math.floor(iv.b / step)
        if kmin > kmax:
            return []
        k_ranges.append((kmin, kmax))

    # qualifying offset patterns relative to the anchor coordinate are the
    # same for every anchor position: enumerate them once, vectorized
    if (2 * d2_hi + 1) ** (n - 1) > 5e7:
        raise GeometryError(
            f"transverse pattern grid too large for C0={gc.C0}, lattice={gc.lattice}; "
            "reduce the lattice fineness")
    rng = np.arange(-d2_hi, d2_hi + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng] * (n - 1)), indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)        # (m, n-1)
    full = np.concatenate([np.zeros((offs.shape[0], 1), dtype=np.int64), offs], axis=1)
    spread = full.max(axis=1) - full.min(axis=1)
    patterns = full[(spread > d2_lo) & (spread <= d2_hi)]

    out = []
    k0min, k0max = k_ranges[0]
    lows = np.array([k_ranges[i][0] for i in range(n)], dtype=np.int64)
    highs = np.array([k_ranges[i][1] for i in range(n)], dtype=np.int64)
    for k0 in range(k0min, k0max + 1):
        ks = patterns + k0
        ok = np.all((ks >= lows) & (ks <= highs), axis=1)
        for row in ks[ok]:
            out.append(Cube(j, tuple(int(k) * step for k in row)))
    return out


@dataclass
class SparseFamily:
    """A sparse subcollection of Whitney cubes: scale gaps of 2^K, same-
    scale separation, interval-injectivity."""

    cubes: list[Cube]
    id: int = 0

    def __post_init__(self):
        self.cubes = sorted(self.cubes, key=Cube.key)

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def scales(self) -> list[int]:
        return sorted({q.j for q in self.cubes})

    def violations(self, gc: GridConstants) -> list[str]:
        """Exhaustive check of the three sparseness conditions."""
        out = []
        sep = (gc.scale_step + 1)
        for a, b in itertools.combinations(self.cubes, 2):
            if a.j == b.j:
                s = a.side
                for i in range(a.n):
                    da = abs(a.center[i] - b.center[i])
                    if da == 0:
                        out.append(f"injectivity: {a} vs {b} share interval {i}")
                    elif da < sep * s:
                        out.append(f"single-scale separation: {a} vs {b} coord {i}")
            else:
                lo, hi = (a, b) if a.j < b.j else (b, a)
                if hi.j - lo.j < gc.K:
                    out.append(f"scale gap: {a} vs {b}")
        return out


def _endpoint_windows(cube: Cube) -> list[Interval]:
    """The two per-coordinate windows where an adjusted endpoint may live
    (outward enlargement by at most 1% of the ADJ_BASE interval)."""
    out = []
    for i in range(cube.n):
        base = cube.interval(i).dilate(ADJ_BASE)
        budget = base.length * ADJ_BUDGET
        out.append(Interval(base.a - budget, base.a))
        out.append(Interval(base.b, base.b + budget))
    return out


def _cross_scale_compatible(small: Cube, large: Cube, guard: bool) -> bool:
    """Whether a smaller cube may share a family with a larger one: its
    worst-case hull must stay clear of the larger cube's adjustment
    windows so the good-dyadic construction cannot get stuck."""
    if not guard:
        return True
    hull = small.potential_hull()
    for w in _endpoint_windows(large):
        if hull.intersects(w):
            return False
    return True


def _same_scale_compatible(a: Cube, b: Cube, gc: GridConstants) -> bool:
    sep = (gc.scale_step + 1) * a.side
    return all(x == y or abs(x - y) >= sep for x, y in zip(a.center, b.center)) \
        and a.center != b.center


def sparsify(cubes, gc: GridConstants, guard_windows: bool = True,
             merge_tries: int = 64, merge_pair_cap: int = 4096) -> list[SparseFamily]:
    """Partition Whitney cubes into sparse families.

    Same-scale cubes are colored by congruence classes: in lattice units,
    cubes sharing a family have identical transverse patterns and anchor
    coordinates congruent modulo twice the separation quantum with equal
    block parity, which forces every coordinate pair to be either equal
    (hence the same cube) or separated by >= (2^K + 1) sidelengths.  A
    bounded greedy pass then merges families across scales when the
    worst-case hulls of the smaller cubes stay clear of the larger cubes'
    adjustment windows (guard_windows), which guarantees that
    build_adjusted_intervals succeeds with zero enlargement; without the
    guard, cross-scale merging only respects the sparseness conditions
    and the adjustment may legitimately fail when K is too small.
    """
    cubes = sorted(cubes, key=Cube.key)
    groups: dict[tuple, list[Cube]] = {}
    S = (gc.scale_step + 1) * (1 << gc.lattice)      # separation in lattice units
    for q in cubes:
        step = Fraction(2) ** (q.j - gc.lattice)
        z = [int(c / step) for c in q.center]
        pattern = tuple(zi - z[-1] for zi in z[:-1])
        anchor = z[-1]
        key = (q.j, pattern, anchor % S, (anchor // S) % 2)
        groups.setdefault(key, []).append(q)

    ordered = [groups[k] for k in sorted(groups, key=lambda k: (-k[0], k[1:]))]
    multi_ok = gc.multi_scale_ok()

    # float prefilter data: worst-case hull span and adjustment windows
    hull_f: dict[Cube, tuple[float, float]] = {}
    wins_f: dict[Cube, list[tuple[float, float]]] = {}

    def hull_span(q: Cube):
        h = hull_f.get(q)
        if h is None:
            iv = q.potential_hull()
            h = (float(iv.a), float(iv.b))
            hull_f[q] = h
        return h

    def windows(q: Cube):
        w = wins_f.get(q)
        if w is None:
            w = [(float(iv.a), float(iv.b)) for iv in _endpoint_windows(q)]
            wins_f[q] = w
        return w

    def cross_ok(small: Cube, large: Cube) -> bool:
        if not guard_windows:
            return True
        lo, hi = hull_span(small)
        margin = 1e-6 * max(1.0, abs(lo), abs(hi))
        for (wa, wb) in windows(large):
            if hi < wa - margin or lo > wb + margin:
                continue
            if _cross_scale_compatible(small, large, guard_windows):
                continue
            return False
        return True

    pool: list[list[Cube]] = []
    pool_scales: list[set[int]] = []
    by_pool_scale: dict[int, list[int]] = {}    # scale -> pool indices containing it

    for fam in ordered:
        j = fam[0].j
        placed = False
        if multi_ok:
            # candidates: recent pool families containing some other scale
            # but not j; a hard scan budget keeps the pass near-linear
            budget = 4 * merge_tries
            tries = 0
            for jj in sorted(by_pool_scale):
                if jj == j or placed:
                    continue
                for gi in reversed(by_pool_scale[jj]):
                    budget -= 1
                    if budget < 0 or tries >= merge_tries:
                        break
                    g = pool[gi]
                    if j in pool_scales[gi] or len(fam) * len(g) > merge_pair_cap:
                        continue
                    tries += 1
                    ok = True
                    for a in fam:
                        for b in g:
                            small, large = (a, b) if a.j < b.j else (b, a)
                            if not cross_ok(small, large):
                                ok = False
                                break
                        if not ok:
                            break
                    if ok:
                        g.extend(fam)
                        pool_scales[gi].add(j)
                        by_pool_scale.setdefault(j, []).append(gi)
                        placed = True
                        break
                if budget < 0:
                    break
        if not placed:
            gi = len(pool)
            pool.append(list(fam))
            pool_scales.append({j})
            by_pool_scale.setdefault(j, []).append(gi)
    return [SparseFamily(g, id=i) for i, g in enumerate(pool)]


def build_adjusted_intervals(family: SparseFamily) -> SparseFamily:
    """Enlarge each ADJ_BASE-dilated interval by at most 1% per side so
    that every endpoint avoids the convex hulls of all smaller-scale
    cubes' dilated adjusted intervals (processed smallest scale first).

    Raises AdjustmentError when some window is completely covered by
    hulls, which happens when the configured K is too small for the
    family's geometry.
    """
    cubes = sorted(family.cubes, key=lambda q: (q.j, q.center))
    hulls: list[Interval] = []
    done: list[Cube] = []
    current_scale = None
    pending: list[Cube] = []

    def flush(scale_cubes):
        for q in scale_cubes:
            adjusted = []
            for i in range(q.n):
                base = q.interval(i).dilate(ADJ_BASE)
                budget = base.length * ADJ_BUDGET
                a = _free_endpoint(Interval(base.a - budget, base.a), hulls, prefer="right")
                b = _free_endpoint(Interval(base.b, base.b + budget), hulls, prefer="left")
                if a is None or b is None:
                    raise AdjustmentError(
                        f"no admissible endpoint for {q} coordinate {i}: "
                        f"increase K or use guard_windows sparsification")
                adjusted.append(Interval(a, b))
            done.append(Cube(q.j, q.center, adjusted))
        for q in done[len(done) - len(scale_cubes):]:
            hulls.append(q.hull())

    for q in cubes:
        if current_scale is None or q.j == current_scale:
            pending.append(q)
            current_scale = q.j
        else:
            flush(pending)
            pending = [q]
            current_scale = q.j
    if pending:
        flush(pending)
    return SparseFamily(done, id=family.id)


def _free_endpoint(window: Interval, hulls, prefer: str):
    """A point of `window` outside every (closed) hull, favoring minimal
    enlargement: the window edge touching the base interval if free,
    otherwise the midpoint of the nearest free gap."""
    edge = window.b if prefer == "right" else window.a
    if not any(h.contains_point(edge) for h in hulls):
        return edge
    cuts = {window.a, window.b}
    for h in hulls:
        if h.intersects(window):
            if window.contains_point(h.a):
                cuts.add(h.a)
            if window.contains_point(h.b):
                cuts.add(h.b)
    pts = sorted(cuts)
    gaps = []
    for lo, hi in zip(pts, pts[1:]):
        mid = (lo + hi) / 2
        if not any(h.contains_point(mid) for h in hulls):
            gaps.append((lo, hi))
    if not gaps:
        return None
    lo, hi = gaps[-1] if prefer == "right" else gaps[0]
    return (lo + hi) / 2


def adjustment_report(family: SparseFamily) -> dict:
    """Per-side enlargement fractions of the adjusted intervals."""
    worst = Fraction(0)
    for q in family:
        if q.adjusted is None:
            raise GeometryError("family has no adjusted intervals")
        for i in range(q.n):
            base = q.interval(i).dilate(ADJ_BASE)
            worst = max(worst,
                        (base.a - q.adjusted[i].a) / base.length,
                        (q.adjusted[i].b - base.b) / base.length)
    return {"max_enlargement_per_side": worst, "budget": ADJ_BUDGET}


def dyadic_lemma_violations(family: SparseFamily) -> list[tuple]:
    """Exhaustive pairwise scan of the good-dyadic predicate: for cubes
    Q, Q' with diam(Q) < diam(Q'), if the HULL_DILATE-dilate of some
    adjusted Q_i meets adjusted Q'_j then the dilates of all coordinates
    are contained in it."""
    out = []
    cubes = family.cubes
    for q, qp in itertools.permutations(cubes, 2):
        if q.j >= qp.j:
            continue
        for i in range(q.n):
            di = q.adjusted[i].dilate(HULL_DILATE)
            for jj in range(qp.n):
                big = qp.adjusted[jj]
                if di.intersects(big):
                    for ip in range(q.n):
                        if not big.contains(q.adjusted[ip].dilate(HULL_DILATE)):
                            out.append((q, qp, i, jj, ip))
    return out


class WhitneyPartition:
    """Partition of unity over a cube family and the induced multiplier
    pieces.

    psi_Q is a tensor bump equal to 1 on the (1/8)-dilate and supported in
    the (1/4)-dilate of Q, inside the flat region of the tensor-factor
    cutoffs so the factorization identity is exact.  The normalizer
    Phi = sum psi_Q is clamped smoothly away from zero, so pieces
    reproduce the ambient symbol exactly where Phi >= tau and fade to
    zero outside the covered region; the normalization constant is
    recorded rather than assumed.
    """

    FLAT = 0.0625   # psi == 1 on |u| <= FLAT   (u in units of the sidelength)
    SUPP = 0.125    # psi == 0 on |u| >= SUPP

    def __init__(self, cubes, gc: GridConstants, tau: float = 0.5, clamp_order: int = 4):
        self.cubes = sorted(cubes, key=Cube.key)
        self.gc = gc
        self.tau = tau
        self.clamp_order = clamp_order
        self._by_scale: dict[int, dict[tuple, int]] = {}
        for idx, q in enumerate(self.cubes):
            step = Fraction(2) ** (q.j - gc.lattice)
            key = tuple(int(c / step) for c in q.center)
            self._by_scale.setdefault(q.j, {})[key] = idx

    def psi(self, cube: Cube, pts: np.ndarray) -> np.ndarray:
        """Tensor bump of one cube at an (n, m) array of points."""
        side = float(cube.side)
        out = np.ones(pts.shape[1])
        for i in range(cube.n):
            u = (pts[i] - float(cube.center[i])) / side
            out *= plateau(u, flat=self.FLAT, supp=self.SUPP)
        return out

    def phi(self, pts: np.ndarray) -> np.ndarray:
        """Sum of all psi_Q at an (n, m) array of points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        m = pts.shape[1]
        tot = np.zeros(m)
        offs = self._offsets()
        for j, index in sorted(self._by_scale.items()):
            step = 2.0 ** (j - self.gc.lattice)
            base = np.round(pts / step).astype(np.int64)
            hit = set()
            for off in offs:
                for t in range(m):
                    key = tuple(base[:, t] + off)
                    idx = index.get(key)
                    if idx is not None:
                        hit.add(idx)
            for idx in sorted(hit):
                tot += self.psi(self.cubes[idx], pts)
        return tot

    def _offsets(self):
        # psi support radius = SUPP * side = SUPP * 2^lattice lattice steps
        r = math.ceil(self.SUPP * (1 << self.gc.lattice))
        rng = range(-r, r + 1)
        n = self.cubes[0].n if self.cubes else 3
        return list(itertools.product(rng, repeat=n))

    def phi_clamped(self, pts: np.ndarray) -> np.ndarray:
        q = self.clamp_order
        return (self.phi(pts) ** q + self.tau ** q) ** (1.0 / q)

    def piece_weight(self, cube: Cube, pts: np.ndarray) -> np.ndarray:
        """psi_Q / clamped Phi at the given points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.psi(cube, pts) / self.phi_clamped(pts)

    def coverage_deficit(self, pts: np.ndarray) -> float:
        """1 - Phi/Phi_clamped, the pointwise reconstruction loss."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return float(np.max(1.0 - self.phi(pts) / self.phi_clamped(pts)))


class Factor1D:
    """One tensor factor of a Whitney piece: a Fourier mode of the
    2Q-periodic series times a cutoff supported in the cube interval.

    The cutoff equals 1 on the (1/4)-dilate, which contains the supports
    of all partition pieces, so summing weight * prod(factors) over modes
    reproduces the piece exactly up to series truncation.
    """

    __slots__ = ("k", "center", "side", "coeff")

    FLAT = 0.125    # cut == 1 on |u| <= FLAT
    SUPP = 0.1875   # cut == 0 on |u| >= SUPP  ((3/8)-dilate, inside Q_i)

    def __init__(self, k: int, center: float, side: float, coeff: complex = 1.0):
        self.k = k
        self.center = center
        self.side = side
        self.coeff = coeff

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.side
        cut = plateau(u, flat=self.FLAT, supp=self.SUPP)
        wave = np.exp(2j * np.pi * self.k * (u + 1.0) / 2.0)
        return self.coeff * wave * cut

    def support(self) -> tuple[float, float]:
        h = self.SUPP * self.side
        return (self.center - h, self.center + h)


@dataclass
class FactoredSymbol:
    """Tensor factorization of one Whitney piece: terms (k, weight,
    factors) with weight = (1 + |k|)^(-10 n); residual scalars are folded
    into the first factor so weight * prod(factors) sums to the piece."""

    cube: Cube
    terms: list  # list of (k tuple, weight float, [Factor1D]*n)
    residual: float

    def evaluate(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        tot = np.zeros(pts.shape[1], dtype=complex)
        for _k, w, factors in self.terms:
            prod = np.ones(pts.shape[1], dtype=complex)
            for i, f in enumerate(factors):
                prod = prod * f(pts[i])
            tot += w * prod
        return tot


class FactorizationError(ValueError):
    pass


def tensor_factorize(piece, cube: Cube, k_max: int, n: int = 3,
                     samples_per_dim: int | None = None,
                     tol: float | None = None) -> FactoredSymbol:
    """Expand a smooth piece supported in (1/2)Q into a weighted sum of
    tensor products via its Fourier series on the doubled cube.

    piece: callable taking an (n, m) point array.  Terms are kept for
    |k|_inf <= k_max.  When tol is given the reconstruction residual on a
    (1/2)Q sample grid must not exceed it.
    """
    m = samples_per_dim or max(4 * k_max + 4, 16)
    side = float(cube.side)
    center = np.array([float(c) for c in cube.center])
    # sample the doubled cube on a regular m^n grid
    t = (np.arange(m) / m) * 2.0 - 1.0       # in units of the sidelength
    grids = np.meshgrid(*([t] * n), indexing="ij")
    pts = np.stack([center[i] + side * grids[i] for i in range(n)]).reshape(n, -1)
    vals = piece(pts).reshape([m] * n)
    coeffs = np.fft.fftn(vals) / (m ** n)

    terms = []
    kr = [k for k in range(-k_max, k_max + 1)]
    for kvec in itertools.product(kr, repeat=n):
        # modes e^(2 pi i k (u+1)/2) sampled at u = -1 + 2t/m reduce to the
        # plain DFT basis e^(2 pi i k t / m), so coefficients read off directly
        c = coeffs[tuple(np.mod(kvec, m))]
        if abs(c) < 1e-300:
            continue
        knorm = float(np.linalg.norm(kvec))
        weight = (1.0 + knorm) ** (-10 * n)
        lead = c / weight
        factors = []
        for i in range(n):
            coeff = lead if i == 0 else 1.0
            factors.append(Factor1D(kvec[i], float(cube.center[i]), side, coeff))
        terms.append((tuple(kvec), weight, factors))

    fs = FactoredSymbol(cube=cube, terms=terms, residual=0.0)
    # residual on a (1/2)Q grid
    th = np.linspace(-0.24, 0.24, 9)
    gh = np.meshgrid(*([th] * n), indexing="ij")
    ph = np.stack([center[i] + side * gh[i] for i in range(n)]).reshape(n, -1)
    ref = piece(ph)
    rec = fs.evaluate(ph)
    scale = float(np.max(np.abs(ref))) or 1.0
    fs.residual = float(np.max(np.abs(rec - ref))) / scale
    if tol is not None and fs.residual > tol:
        raise FactorizationError(
            f"reconstruction residual {fs.residual:.3e} exceeds {tol:.3e} at k_max={k_max}")
    return fs


def symbol_class_report(m_func, v: DegeneracyVector, points, max_order: int = 4,
                        h: float = 1e-3) -> dict:
    """Sampled finite-difference check of the degeneracy-weighted symbol
    estimates |d^a m| <= C prod (|v_i| d_v(xi, span v))^(-a_i), order <= 4.

    Returns the worst observed constant per total order.
    """
    worst = {k: 0.0 for k in range(max_order + 1)}
    for xi in points:
        xi = np.asarray(xi, dtype=float)
        d = dv_distance_to_line(xi, v)
        if d == 0:
            continue
        for order in range(max_order + 1):
            for alpha in _multi_indices(v.n, order):
                fd = _finite_diff(m_func, xi, alpha, h)
                weight = np.prod([(abs(v.v[i]) * d) ** alpha[i] for i in range(v.n)])
                worst[order] = max(worst[order], abs(fd) * float(weight))
    return worst


def _multi_indices(n, total):
    if n == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _multi_indices(n - 1, total - head):
            yield (head,) + rest


def _finite_diff(f, x, alpha, h):
    val = 0.0 + 0.0j
    offsets = [range(a + 1) for a in alpha]
    for combo in itertools.product(*offsets):
        coef = 1.0
        pt = x.astype(float).copy()
        for i, (a, c) in enumerate(zip(alpha, combo)):
            coef *= math.comb(a, c) * (-1) ** c
            pt[i] += (a / 2.0 - c) * h
        val += coef * complex(f(pt.reshape(-1, 1))[0])
    denom = h ** sum(alpha)
    return val / denom
