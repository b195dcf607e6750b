"""Tiles, multi-tiles, trees and their combinatorial anatomy.

A multi-tile is a spatial dyadic interval paired with a frequency box
from a sparse family; component i-tiles share the spatial interval.  All
order/tree predicates are evaluated in rescaled frequency coordinates
with exact rational arithmetic: dividing by v_i maps the original-
coordinate intervals onto the cube intervals, preserving containment and
intersection, so nothing is lost by staying rescaled.

Tree tops are stored as the scalar s with xi_T = s * v; the top window
[s - 500/|I|, s + 500/|I|] is the rescaled form of the paper-style
window, exact because L^{-1}(xi_T) sits on the diagonal.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dyadic import Interval, frac, merge_intervals
from .geometry import TOP_RADIUS, Cube, DegeneracyVector, GridConstants


class StructuralViolation(AssertionError):
    pass


class MultiTile:
    """Spatial dyadic interval x frequency box; |I| = 2^(-K jP)."""

    __slots__ = ("box", "I", "jP")

    def __init__(self, box: Cube, I: Interval, K: int):
        if box.j % K != 0:
            raise StructuralViolation(f"box scale {box.j} not a multiple of K={K}")
        jP = box.j // K
        if I.length != Fraction(2) ** (-K * jP):
            raise StructuralViolation(
                f"|I| = {I.length} does not match 2^(-K jP) = {Fraction(2)**(-K*jP)}")
        if box.adjusted is None:
            raise StructuralViolation("box has no adjusted intervals")
        self.box = box
        self.I = I
        self.jP = jP

    @property
    def n(self) -> int:
        return self.box.n

    def omega_rescaled(self, i: int) -> Interval:
        return self.box.interval(i)

    def omega_bar(self, i: int) -> Interval:
        return self.box.adjusted[i]

    def tile(self, i: int) -> "Tile":
        return Tile(self, i)

    def key(self):
        return (self.jP, self.I.a, self.box.center)

    def __eq__(self, other):
        return (isinstance(other, MultiTile) and self.box == other.box
                and self.I == other.I)

    def __hash__(self):
        return hash((self.box, self.I))

    def __repr__(self):
        return f"MultiTile(jP={self.jP}, I=[{self.I.a},{self.I.b}], box={self.box})"


class Tile:
    """View of one coordinate of a multi-tile."""

    __slots__ = ("mt", "i")

    def __init__(self, mt: MultiTile, i: int):
        self.mt = mt
        self.i = i

    @property
    def I(self) -> Interval:
        return self.mt.I

    @property
    def omega_rescaled(self) -> Interval:
        return self.mt.omega_rescaled(self.i)

    @property
    def omega_bar(self) -> Interval:
        return self.mt.omega_bar(self.i)

    def omega(self, v: DegeneracyVector) -> tuple[float, float]:
        """Frequency interval in original coordinates (floats)."""
        lo = float(self.omega_rescaled.a) * float(v.v[self.i])
        hi = float(self.omega_rescaled.b) * float(v.v[self.i])
        return (min(lo, hi), max(lo, hi))


def tile_leq(P: Tile, P2: Tile) -> bool:
    """Order on i-tiles: spatial containment plus reverse containment of
    the adjusted frequency intervals."""
    if P.i != P2.i:
        raise ValueError("tile order is defined for tiles of equal coordinate index")
    return P2.I.contains(P.I) and P.omega_bar.contains(P2.omega_bar)


def multitile_leq(A: MultiTile, B: MultiTile) -> bool:
    return any(tile_leq(A.tile(i), B.tile(i)) for i in range(A.n))


def make_tiles(boxes, K: int, window: Interval) -> list[MultiTile]:
    """All multi-tiles of the given boxes whose spatial dyadic intervals
    tile the window (spatial truncation of the limiting argument)."""
    out = []
    for box in boxes:
        jP = box.j // K
        ln = Fraction(2) ** (-K * jP)
        if ln > window.length:
            continue
        k0 = int(window.a / ln)
        while Fraction(k0) * ln > window.a:
            k0 -= 1
        k = k0
        while Fraction(k) * ln < window.b:
            a = Fraction(k) * ln
            if a >= window.a and a + ln <= window.b:
                out.append(MultiTile(box, Interval(a, a + ln), K))
            k += 1
    out.sort(key=MultiTile.key)
    return out


def top_window(s: Fraction, I_top: Interval) -> Interval:
    r = Fraction(TOP_RADIUS) / I_top.length
    return Interval(frac(s) - r, frac(s) + r)


def tile_fits_top(mt: MultiTile, s: Fraction, I_top: Interval) -> bool:
    if not I_top.contains(mt.I):
        return False
    w = top_window(s, I_top)
    return any(mt.omega_bar(i).contains(w) for i in range(mt.n))


class Tree:
    """Set of multi-tiles subordinate to top data (xi = s*v, I_top)."""

    def __init__(self, tiles, s, I_top: Interval, v: DegeneracyVector,
                 gc: GridConstants, check: bool = True):
        self.tiles = sorted(tiles, key=MultiTile.key)
        self.s = frac(s)
        self.I_top = I_top
        self.v = v
        self.gc = gc
        if check:
            self.validate()

    def validate(self):
        if not self.tiles:
            raise StructuralViolation("a tree must be non-empty")
        for mt in self.tiles:
            if not tile_fits_top(mt, self.s, self.I_top):
                raise StructuralViolation(f"{mt} does not fit top (s={self.s}, I={self.I_top})")
        js = [q.j for q in self.box_set()]
        if len(js) != len(set(js)):
            raise StructuralViolation("box set has a repeated frequency parameter")

    def __len__(self):
        return len(self.tiles)

    def __iter__(self):
        return iter(self.tiles)

    def box_set(self) -> list[Cube]:
        seen = {}
        for mt in self.tiles:
            seen.setdefault((mt.box.j, mt.box.center), mt.box)
        return [seen[k] for k in sorted(seen)]

    def scale_set(self) -> list[int]:
        return sorted({mt.jP for mt in self.tiles})

    def box_for_scale(self, j: int) -> Cube:
        for mt in self.tiles:
            if mt.jP == j:
                return mt.box
        raise KeyError(f"no box at frequency parameter {j}")

    def support(self, box: Cube) -> list[Interval]:
        """E_{Q,T}: union of the spatial intervals of tiles with this box."""
        return merge_intervals(mt.I for mt in self.tiles if mt.box == box)

    def xi_component(self, i: int) -> float:
        return float(self.s) * float(self.v.v[i])

    def omega_top_rescaled(self) -> Interval:
        """omega_{i,T} divided by v_i (i-independent): [s -+ 1/(2|I_T|)]."""
        h = Fraction(1, 2) / self.I_top.length
        return Interval(self.s - h, self.s + h)

    def omega_top(self, i: int) -> tuple[float, float]:
        """omega_{i,T} in original coordinates (floats)."""
        half = 2.0 ** float(self.v.M[i]) / (2.0 * float(self.I_top.length))
        xi = self.xi_component(i)
        return (xi - half, xi + half)

    def is_lacunary(self, mt: MultiTile, i: int) -> bool:
        """i-lacunary: (xi_T)_i outside 2*omega_{P_i}; exact in rescaled
        coordinates since s*(1,..,1) is the rescaled top."""
        return not mt.omega_rescaled(i).dilate(2).contains_point(self.s)

    def lacunarity_class(self, mt: MultiTile) -> frozenset:
        return frozenset(i for i in range(mt.n) if self.is_lacunary(mt, i))

    def __repr__(self):
        return (f"Tree(s={self.s}, I_top=[{self.I_top.a},{self.I_top.b}], "
                f"{len(self.tiles)} tiles)")


def maximal_tree(tiles, s, I_top: Interval, v, gc) -> Tree | None:
    """The maximal tree with the given top data inside a tile collection."""
    chosen = [mt for mt in tiles if tile_fits_top(mt, frac(s), I_top)]
    if not chosen:
        return None
    return Tree(chosen, s, I_top, v, gc)


def split_by_lacunarity(T: Tree) -> dict[frozenset, Tree]:
    """Partition of a tree into lacunarity classes T_A, A the set of
    lacunary coordinates.  The empty class must be empty: the rescaled
    top lies on the diagonal, which the doubled cube misses whenever
    C0 >= 2, and a violation indicates broken Whitney geometry upstream.
    """
    groups: dict[frozenset, list[MultiTile]] = {}
    for mt in T.tiles:
        groups.setdefault(T.lacunarity_class(mt), []).append(mt)
    if frozenset() in groups:
        raise StructuralViolation(
            f"non-lacunary-in-every-coordinate tiles exist: {groups[frozenset()][:3]}")
    out = {}
    for A in sorted(groups, key=sorted):
        out[A] = Tree(groups[A], T.s, T.I_top, T.v, T.gc, check=False)
    # heritage: lacunarity depends only on the box, so per-box supports agree
    for A, TA in out.items():
        for box in TA.box_set():
            if TA.support(box) != T.support(box):
                raise StructuralViolation("support heritage violated by lacunarity split")
    return out


@dataclass
class TreeAnatomy:
    """Combinatorial anatomy of one tree: exact supports, the maximal-
    interval partition of I_T, the hull sets E~_j with components and
    side intervals, and the boundary-weight diagnostic mu_j."""

    tree: Tree
    supports: dict            # (j_Q) -> list[Interval]
    partition: list           # I_T-partition by maximal K-dyadic intervals
    hulls: dict               # j -> list[Interval] (merged components of E~_j)
    j_top: int
    j_last: int

    def components(self, j: int) -> list[Interval]:
        return self.hulls.get(j, [])

    def hull_set(self, j: int) -> list[Interval]:
        if j < self.j_top:
            return []
        if j > self.j_last:
            return []
        return self.hulls[j]

    def side_intervals(self, i: int) -> list[tuple]:
        """(j, side, Interval) for every component edge, side intervals
        scaled by 2^(-K(j + m_i)).  Exact when M_i is an integer."""
        gc = self.tree.gc
        Mi = self.tree.v.M_int[i] if self.tree.v.M_int is not None else None
        out = []
        for j in range(max(self.j_top, 1), self.j_last + 1):
            if Mi is not None:
                unit = Fraction(2) ** (-(gc.K * j + Mi))
            else:
                unit = frac(2.0 ** (-(gc.K * j + float(self.tree.v.M[i])))).limit_denominator(1 << 62)
            for comp in self.hulls.get(j, []):
                out.append((j, "l", Interval(comp.a - unit / 2, comp.a - unit / 4)))
                out.append((j, "r", Interval(comp.b + unit / 4, comp.b + unit / 2)))
        return out

    def level_function(self) -> list[tuple[Interval, int]]:
        """j(x) = max{j >= j_top : x in E~_j} as piecewise-constant data:
        disjoint intervals with their level, covering E~_{j_top}."""
        out = []
        prev = self.hull_set(self.j_top)
        for j in range(self.j_top, self.j_last + 1):
            nxt = self.hull_set(j + 1) if j + 1 <= self.j_last else []
            out.extend((iv, j) for iv in _subtract(prev, nxt))
            prev = nxt
        return out

    def get_tile(self, I0: Interval, j0: int) -> MultiTile | None:
        """If 3*I0 meets E~_{j0}, a tree tile with I_P inside 10*I0 and
        |I_P| <= |I0| is guaranteed to exist; returns one or None."""
        tripled = I0.dilate(3)
        if not any(tripled.intersects_open(iv) for iv in self.hull_set(j0)):
            return None
        big = I0.dilate(10)
        for mt in self.tree.tiles:
            if mt.I.length <= I0.length and big.contains(mt.I):
                return mt
        raise StructuralViolation(f"get-tile property failed for {I0} at j0={j0}")

    def support_nesting(self) -> bool:
        """Greedy-tree nesting: j_Q < j_Q' implies E_{Q} contains E_{Q'}."""
        js = sorted(self.supports)
        for ja, jb in itertools.combinations(js, 2):
            inner = self.supports[jb]
            outer = self.supports[ja]
            for iv in inner:
                if not any(o.contains(iv) for o in outer):
                    return False
        return True

    def mu(self, grid, j: int) -> np.ndarray:
        """Boundary-weight diagnostic on the signal grid."""
        gc = self.tree.gc
        out = np.zeros(grid.n)
        for jp in range(self.j_top, self.j_last + 1):
            comps = self.hull_set(jp)
            damp = 2.0 ** (-abs(jp - j) / 100.0)
            scale = 2.0 ** (gc.K * jp)
            for iv in comps:
                for y in (float(iv.a), float(iv.b)):
                    out += damp * (1.0 + scale * grid.pdist(grid.x, y)) ** (-100.0)
        return out


def _subtract(cover: list[Interval], minus: list[Interval]) -> list[Interval]:
    """Set difference of merged interval unions (endpoints exact)."""
    out = []
    for iv in cover:
        pieces = [iv]
        for m in minus:
            nxt = []
            for p in pieces:
                if not p.intersects_open(m):
                    nxt.append(p)
                    continue
                if p.a < m.a:
                    nxt.append(Interval(p.a, max(p.a, min(p.b, m.a))))
                if m.b < p.b:
                    nxt.append(Interval(min(p.b, max(p.a, m.b)), p.b))
            pieces = [q for q in nxt if q.length > 0]
        out.extend(pieces)
    return merge_intervals(out) if out else []


def compute_anatomy(T: Tree, gc: GridConstants) -> TreeAnatomy:
    supports = {}
    for box in T.box_set():
        supports[box.j // gc.K] = T.support(box)

    partition = []
    tiles_I = [mt.I for mt in T.tiles]
    min_len = min(iv.length for iv in tiles_I)

    def qualifies(iv: Interval) -> bool:
        tripled = iv.dilate(3)
        return not any(tripled.contains(tI) for tI in tiles_I)

    def descend(iv: Interval):
        if qualifies(iv):
            partition.append(iv)
            return
        step = iv.length / (1 << gc.K)
        if step <= 0 or iv.length < min_len / 8:
            partition.append(iv)    # unreachable guard; 3|I| < min|I_P| always qualifies
            return
        for k in range(1 << gc.K):
            descend(Interval(iv.a + k * step, iv.a + (k + 1) * step))

    descend(T.I_top)
    partition.sort(key=lambda iv: iv.a)

    L = T.I_top.length
    j_top = 0
    while Fraction(2) ** (-gc.K * j_top) > L:
        j_top += 1
    j_last = j_top
    shortest = min(iv.length for iv in partition)
    while Fraction(2) ** (-gc.K * (j_last + 1)) > shortest:
        j_last += 1

    hulls = {}
    for j in range(j_top, j_last + 1):
        thr = Fraction(2) ** (-gc.K * j)
        members = [iv for iv in partition if iv.length < thr]
        hulls[j] = merge_intervals(members) if members else []

    return TreeAnatomy(tree=T, supports=supports, partition=partition,
                       hulls=hulls, j_top=j_top, j_last=j_last)


def anatomy_invariant_violations(an: TreeAnatomy) -> list[str]:
    """Exhaustive structural checks of the anatomy lemmas."""
    out = []
    gc = an.tree.gc
    # the partition tiles I_top exactly
    total = sum(iv.length for iv in an.partition)
    if total != an.tree.I_top.length:
        out.append("partition does not cover I_top")
    for a, b in zip(an.partition, an.partition[1:]):
        if a.b != b.a:
            out.append(f"partition gap at {a.b}")
        ratio = max(a.length, b.length) / min(a.length, b.length)
        if ratio > (1 << gc.K):
            out.append(f"neighbor ratio {ratio} exceeds 2^K")
    # hull sets decrease and are unions of K-dyadic blocks of length 2^(-Kj)
    for j in range(an.j_top, an.j_last + 1):
        blk = Fraction(2) ** (-gc.K * j)
        for comp in an.hull_set(j):
            if comp.a % blk != 0 or comp.b % blk != 0:
                out.append(f"E~_{j} component {comp} not aligned to 2^-K{j} blocks")
        if j > an.j_top:
            for comp in an.hull_set(j):
                if not any(o.contains(comp) for o in an.hull_set(j - 1)):
                    out.append(f"E~_{j} not inside E~_{j-1}")
    # E~_j contains E_{Q^j, T} for scales present in the tree
    for j, sup in an.supports.items():
        if j < an.j_top or j > an.j_last:
            continue
        for iv in sup:
            if not any(h.contains(iv) for h in an.hull_set(j)):
                out.append(f"E~_{j} misses support piece {iv}")
    return out


@dataclass
class BoundaryStats:
    sumE: float
    sumHull: float
    side_disjoint: bool
    min_gap_ok: bool
    c_count_E: float
    c_count_hull: float


def _boundary_count(components: list[Interval], period: Fraction | None = None) -> int:
    if not components:
        return 0
    if period is not None and len(components) == 1 and components[0].length >= period:
        return 0
    return 2 * len(components)


def boundary_statistics(an: TreeAnatomy, period=None) -> BoundaryStats:
    gc = an.tree.gc
    L = float(an.tree.I_top.length)
    sumE = 0.0
    for j, sup in an.supports.items():
        sumE += 2.0 ** (-gc.K * j) * _boundary_count(sup, period)
    sumHull = 0.0
    for j in range(an.j_top, an.j_last + 1):
        sumHull += 2.0 ** (-gc.K * j) * _boundary_count(an.hull_set(j), period)

    side_disjoint = True
    min_gap_ok = True
    for i in range(an.tree.v.n):
        for side in ("l", "r"):
            ivs = [(j, iv) for (j, sd, iv) in an.side_intervals(i) if sd == side]
            for (ja, a), (jb, b) in itertools.combinations(ivs, 2):
                if a.intersects_open(b):
                    side_disjoint = False
                    continue
                gap = a.dist(b)
                need = Fraction(2) ** (-gc.K * (min(ja, jb) + 2))
                if gap < need:
                    min_gap_ok = False
    return BoundaryStats(sumE=sumE, sumHull=sumHull, side_disjoint=side_disjoint,
                         min_gap_ok=min_gap_ok,
                         c_count_E=sumE / L if L else 0.0,
                         c_count_hull=sumHull / L if L else 0.0)


@dataclass
class SeparationReport:
    variant: str
    hypothesis_hits: int
    violations: list


def separation_check(selection_log: list[Tree], i: int, variant: str,
                     shift: int = 0) -> SeparationReport:
    """Exhaustive scan of the greedy-selection separation lemmas over a
    logged run (trees in selection order, (xi_T)_i nonincreasing).

    pair: tiles P in T, P' in T' with overlapping 10-dilated frequency
    intervals, strictly smaller |omega_P|, and overlapping shifted
    one-sided windows force I_{P'} disjoint from I_T.
    triple: the analogous top-window hypotheses force an empty triple
    intersection of tree tops.
    """
    trees = selection_log
    xs = [t.xi_component(i) for t in trees]
    for a, b in zip(xs, xs[1:]):
        if a < b - 1e-12 * max(1.0, abs(a)):
            raise StructuralViolation("selection log is not (xi_T)_i-monotone")

    hits = 0
    violations = []
    if variant == "pair":
        for ta, tb in itertools.product(trees, repeat=2):
            sign = 1 if ta.v.v[i] > 0 else -1
            for P in ta.tiles:
                wP = P.omega_rescaled(i)
                for Pp in tb.tiles:
                    wPp = Pp.omega_rescaled(i)
                    if not (wP.length < wPp.length):
                        continue
                    if not wP.dilate(10).intersects(wPp.dilate(10)):
                        continue
                    wa = _omega_plus(ta.s, wP.length, sign, shift, ta.gc.C0, 5000)
                    wb = _omega_plus(tb.s, wPp.length, sign, shift, tb.gc.C0, 5000)
                    if not wa.intersects(wb):
                        continue
                    hits += 1
                    if ta.I_top.intersects_open(Pp.I):
                        violations.append((ta, tb, P, Pp))
        return SeparationReport("pair", hits, violations)

    if variant == "triple":
        for t0 in trees:
            sign = 1 if t0.v.v[i] > 0 else -1
            cands = []
            for tj in trees:
                if tj.I_top.length > t0.I_top.length:
                    # |omega_{i,T0}| <= |omega_{i,Tj}| means |I_T0| >= |I_Tj|
                    continue
                if not t0.omega_top_rescaled().dilate(10).intersects(
                        tj.omega_top_rescaled().dilate(10)):
                    continue
                w0 = _omega_plus(t0.s, 1 / t0.I_top.length, sign, shift, 1, 10)
                wj = _omega_plus(tj.s, 1 / tj.I_top.length, sign, shift, 1, 10)
                if not w0.intersects(wj):
                    continue
                cands.append(tj)
            for t1, t2, t3 in itertools.combinations(cands, 3):
                hits += 1
                lo = max(t1.I_top.a, t2.I_top.a, t3.I_top.a)
                hi = min(t1.I_top.b, t2.I_top.b, t3.I_top.b)
                if hi > lo:
                    violations.append((t0, t1, t2, t3))
        return SeparationReport("triple", hits, violations)

    raise ValueError(f"variant must be pair or triple, got {variant!r}")


def _omega_plus(s_tree: Fraction, rescaled_width: Fraction, sign: int,
                shift: int, C0: int, base: int) -> Interval:
    lo = Fraction(2) ** (-shift) * base * C0 * rescaled_width
    hi = 4 * lo
    if sign > 0:
        return Interval(s_tree + lo, s_tree + hi)
    return Interval(s_tree - hi, s_tree - lo)
