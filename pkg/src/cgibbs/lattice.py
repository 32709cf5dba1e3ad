"""Finite lattice regions in Z^d and the pixel-tiling geometry.

Sites are integer tuples, regions are frozen sets of sites, and all
distances are graph (l1) distances.  On top of the basic boundary/closure
calculus this module builds the staggered pixel tiling, grained sets
(clusters of pixels extended by the kept gap sites), fat rectangles, and
the overlapping C_n/D_n splits used by the recursive entropy analysis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

__all__ = [
    "Site",
    "Region",
    "Tiling",
    "GrainedSet",
    "FatRectangle",
    "dist",
    "region",
    "box",
    "boundary",
    "closure",
    "build_tiling",
    "grained_set",
    "split_fat_rectangle",
    "region_to_json",
    "region_from_json",
    "tiling_to_json",
]

Site = tuple[int, ...]
Region = frozenset  # frozenset[Site]


def region(sites) -> Region:
    """Normalize an iterable of coordinate tuples into a Region."""
    out = frozenset(tuple(int(c) for c in s) for s in sites)
    dims = {len(s) for s in out}
    if len(dims) > 1:
        raise ValueError(f"sites of mixed dimension: {sorted(dims)}")
    return out


def box(lo: Site, hi: Site) -> Region:
    """All lattice sites x with lo <= x <= hi coordinate-wise."""
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    return frozenset(itertools.product(*ranges))


def dist(a, b) -> int:
    """l1 distance between sites, a site and a region, or two regions.

    Empty regions are at distance +inf from everything (so that e.g.
    dist(C \\ D, D \\ C) with D ⊆ C never constrains an inequality).
    """
    if isinstance(a, tuple) and isinstance(b, tuple):
        return sum(abs(x - y) for x, y in zip(a, b))
    aa = {a} if isinstance(a, tuple) else a
    bb = {b} if isinstance(b, tuple) else b
    if not aa or not bb:
        return float("inf")
    return min(sum(abs(x - y) for x, y in zip(s, t)) for s in aa for t in bb)


def _ball(x: Site, radius: int):
    """Sites at l1 distance <= radius from x."""
    d = len(x)
    out = []
    for deltas in itertools.product(range(-radius, radius + 1), repeat=d):
        if sum(abs(v) for v in deltas) <= radius:
            out.append(tuple(c + v for c, v in zip(x, deltas)))
    return out


def boundary(A: Region, kappa: int) -> Region:
    """Sites outside A at distance < kappa from it: {x ∉ A : dist(x, A) < κ}."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    out = set()
    for x in A:
        out.update(_ball(x, kappa - 1))
    return frozenset(out - set(A))


def closure(A: Region, kappa: int) -> Region:
    """A together with its boundary, written A∂."""
    return frozenset(A | boundary(A, kappa))


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tiling:
    """Staggered cover of a window by hypercube pixels of side D.

    Pixels are pairwise at distance exactly kappa and their closures cover
    the window.  `anchors[i]` is the minimal corner of pixel i.
    """

    dimension: int
    pixel_side: int
    kappa: int
    anchors: tuple
    window: Region

    @property
    def pixels(self) -> list:
        D = self.pixel_side
        return [box(a, tuple(c + D - 1 for c in a)) for a in self.anchors]

    def pixel(self, i: int) -> Region:
        a = self.anchors[i]
        return box(a, tuple(c + self.pixel_side - 1 for c in a))

    def column_axis_range(self, i: int) -> tuple:
        """Ranges of coordinates 2..d of pixel i (the column 'tube' it lives in)."""
        a = self.anchors[i]
        return tuple((a[k], a[k] + self.pixel_side - 1) for k in range(1, self.dimension))


def _anchor_lattice(d: int, D: int, kappa: int):
    """Infinite pixel-anchor family of the staggered tiling, as a generator
    of anchors intersecting a bounding box of interest (handled by caller)."""
    # Sheet seeds: A_0 at the origin and, for each axis j = 2..d, a copy
    # shifted by t^j = (floor((D-1+kappa)/2), 0, ..., D-1+kappa, ..., 0).
    stride = D + kappa - 1
    half = (D - 1 + kappa) // 2
    seeds = [tuple(0 for _ in range(d))]
    for j in range(1, d):
        t = [0] * d
        t[0] = half
        t[j] = stride
        seeds.append(tuple(t))
    return seeds, stride


def build_tiling(d: int, D: int, kappa: int, window: Region) -> Tiling:
    """Tiling of `window` per the staggered-pixel construction.

    Keeps the pixels that intersect the window; if some window site is then
    not covered by any kept pixel closure, the pixels whose closures contain
    the missed sites are added as well.
    """
    if D < 2 * kappa - 1:
        raise ValueError(f"pixel side D={D} too small for kappa={kappa} (need D >= 2*kappa - 1)")
    if not window:
        return Tiling(d, D, kappa, (), window)
    dims = {len(s) for s in window}
    if dims != {d}:
        raise ValueError(f"window dimension {dims} != {d}")

    seeds, stride = _anchor_lattice(d, D, kappa)
    lo = tuple(min(s[k] for s in window) for k in range(d))
    hi = tuple(max(s[k] for s in window) for k in range(d))

    # Enumerate anchors of pixels whose closure can intersect the window.
    anchors = set()
    for seed in seeds:
        ranges = []
        for k in range(d):
            step = stride if k == 0 else 2 * stride
            a_min = lo[k] - (D - 1) - kappa
            a_max = hi[k] + kappa
            first = seed[k] + step * ((a_min - seed[k]) // step)
            ranges.append(range(first, a_max + 1, step))
        anchors.update(itertools.product(*ranges))

    def pixel_of(a):
        return box(a, tuple(c + D - 1 for c in a))

    kept = sorted(a for a in anchors if pixel_of(a) & window)
    covered = set()
    for a in kept:
        covered.update(closure(pixel_of(a), kappa))
    missed = set(window) - covered
    if missed:
        extra = sorted(
            a
            for a in anchors
            if a not in set(kept) and closure(pixel_of(a), kappa) & missed
        )
        kept = sorted(set(kept) | set(extra))
        for a in extra:
            covered.update(closure(pixel_of(a), kappa))
        if set(window) - covered:
            raise ValueError("tiling failed to cover the window")

    t = Tiling(d, D, kappa, tuple(kept), frozenset(window))
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            if _pixel_box_dist(t, i, j) < kappa:
                raise AssertionError("tiling pixels closer than kappa")
    return t


# ---------------------------------------------------------------------------
# Grained sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrainedSet:
    region: Region
    source_pixels: tuple
    inner_boundary: Region
    tiling: Tiling = field(compare=False)


def _dist_to_pixel(t: Tiling, x: Site, i: int) -> int:
    """l1 distance from x to the axis-aligned box of pixel i."""
    a = t.anchors[i]
    D = t.pixel_side
    return sum(max(0, a[k] - x[k], x[k] - (a[k] + D - 1)) for k in range(t.dimension))


def _pixel_box_dist(t: Tiling, i: int, j: int) -> int:
    a, b = t.anchors[i], t.anchors[j]
    D = t.pixel_side
    return sum(max(0, abs(a[k] - b[k]) - (D - 1)) for k in range(t.dimension))


def _in_column_tube(t: Tiling, x: Site, i: int) -> bool:
    """Is x inside the infinite tube of pixel i's column?"""
    return all(a <= x[k + 1] <= b for k, (a, b) in enumerate(t.column_axis_range(i)))


def _centre_of_column(t: Tiling, x: Site, i: int) -> bool:
    """Distance of x from the column tube's complement is >= kappa."""
    if t.dimension == 1:
        return True
    for k, (a, b) in enumerate(t.column_axis_range(i)):
        c = x[k + 1]
        if min(c - (a - 1), (b + 1) - c) < t.kappa:
            return False
    return True


def _pixels_adjacent(t: Tiling, i: int, j: int) -> bool:
    return _pixel_box_dist(t, i, j) <= t.kappa


def _connected_pixels(t: Tiling, idxs) -> bool:
    idxs = list(idxs)
    if not idxs:
        return False
    frontier = [idxs[0]]
    rest = set(idxs[1:])
    while frontier:
        i = frontier.pop()
        for j in list(rest):
            if _pixels_adjacent(t, i, j):
                rest.discard(j)
                frontier.append(j)
    return not rest


def _fill_holes(sites: set, d: int) -> set:
    """Smallest simply connected superset: add finite complement components."""
    if d == 1 or not sites:
        return sites
    lo = tuple(min(s[k] for s in sites) - 1 for k in range(d))
    hi = tuple(max(s[k] for s in sites) + 1 for k in range(d))
    inside = {
        x
        for x in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)])
        if x not in sites
    }
    # Flood-fill the complement from the bounding shell; unreached cells are holes.
    frontier = [x for x in inside if any(x[k] in (lo[k], hi[k]) for k in range(d))]
    outside = set(frontier)
    while frontier:
        x = frontier.pop()
        for k in range(d):
            for sgn in (-1, 1):
                y = tuple(c + sgn * (k == m) for m, c in enumerate(x))
                if y in inside and y not in outside:
                    outside.add(y)
                    frontier.append(y)
    holes = inside - outside
    return sites | holes


def grained_set(cluster, tiling: Tiling) -> GrainedSet:
    """Grained set of a connected pixel cluster.

    Walks the boundary of the pixel union and keeps or rejects each site by
    the same-column / between-columns case analysis; the kept sites joined
    with the pixels (holes filled) form the grained region, the rejected
    sites its boundary.
    """
    cluster = tuple(sorted(set(int(i) for i in cluster)))
    if not cluster:
        raise ValueError("empty pixel cluster")
    if not _connected_pixels(tiling, cluster):
        raise ValueError("pixel cluster is not connected")
    t = tiling
    d = t.dimension
    kappa = t.kappa
    cl = set(cluster)
    union = set()
    for i in cluster:
        union |= t.pixel(i)
    bd = boundary(frozenset(union), kappa)

    import numpy as np

    anchor_arr = np.asarray(t.anchors)
    kept = set()
    for x in bd:
        # Pixels (cluster or not) having x in their boundary.
        xv = np.asarray(x)
        dists = np.maximum(
            np.maximum(anchor_arr - xv, xv - (anchor_arr + t.pixel_side - 1)), 0
        ).sum(axis=1)
        owners = [int(i) for i in np.nonzero((dists > 0) & (dists < kappa))[0]]
        cl_owners = [i for i in owners if i in cl]
        if not cl_owners:
            continue
        if d >= 3:
            # Intersection-of-boundaries rule.
            if len(cl_owners) >= 2 and len(cl_owners) == len(owners):
                kept.add(x)
            continue
        in_tube = any(_in_column_tube(t, x, i) for i in owners)
        if in_tube:
            # All owners share the column: same-column cases.
            if len(cl_owners) >= 2:
                if _centre_of_column(t, x, cl_owners[0]):
                    kept.add(x)
            continue  # single cluster owner in its column: rejected
        # Between two columns: count cluster owners per column tube.
        cols = {}
        for i in cl_owners:
            cols.setdefault(t.column_axis_range(i), []).append(i)
        if len(cl_owners) >= 3:
            kept.add(x)
        elif len(cols) == 2 and all(len(v) == 1 for v in cols.values()):
            kept.add(x)

    sites = _fill_holes(union | kept, d)
    reg = frozenset(sites)
    kept_final = reg & bd
    inner = frozenset(bd - boundary(reg, kappa))
    return GrainedSet(region=reg, source_pixels=cluster, inner_boundary=inner, tiling=t)


# ---------------------------------------------------------------------------
# Fat rectangles and the overlapping split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FatRectangle:
    """Rectangle anchor + [1,l_1] x ... x [1,l_d], fat iff min side >= max/10."""

    anchor: Site
    sides: tuple

    @property
    def fat_flag(self) -> bool:
        return min(self.sides) >= max(self.sides) / 10

    @property
    def sites(self) -> Region:
        lo = tuple(a + 1 for a in self.anchor)
        hi = tuple(a + l for a, l in zip(self.anchor, self.sides))
        return box(lo, hi)

    def sides_in_pixels(self, D: int, kappa: int) -> tuple:
        """Largest k_j with (2D-1)k_j + 2(kappa-1)(k_j-1) <= l_j per axis."""
        out = []
        for l in self.sides:
            k = (l + 2 * (kappa - 1)) // (2 * D - 1 + 2 * (kappa - 1))
            out.append(max(k, 0))
        return tuple(out)


def split_fat_rectangle(T: FatRectangle, n: int, tiling: Tiling):
    """Overlapping halves (C_n, D_n) of T as grained sets.

    Cuts along the longest axis at l/2 with an overlap strip of width
    n * floor(sqrt(L)), L = half the longest side; each half is the grained
    set of the pixels its slab contains.
    """
    if not T.fat_flag:
        raise ValueError("rectangle is not fat")
    sides = T.sides
    axis = max(range(len(sides)), key=lambda k: sides[k])
    L = sides[axis] / 2
    a_L = int(L**0.5)
    n_L = int(L / (10 * a_L)) if a_L >= 1 else 0
    if n_L < 1:
        raise ValueError(f"side too small for any valid split (n_L = {n_L})")
    if not 1 <= n <= n_L:
        raise ValueError(f"n = {n} outside 1..{n_L}")

    lo_cut = T.anchor[axis] + 1
    c_hi = T.anchor[axis] + sides[axis] // 2 + n * a_L
    d_lo = T.anchor[axis] + sides[axis] // 2 + (n - 1) * a_L + 1

    sites = T.sites
    c_slab = frozenset(s for s in sites if s[axis] <= c_hi)
    d_slab = frozenset(s for s in sites if s[axis] >= d_lo)

    def subordinate(slab):
        idxs = [i for i in range(len(tiling.anchors)) if tiling.pixel(i) <= slab]
        if not idxs:
            raise ValueError("slab contains no whole pixel")
        return grained_set(idxs, tiling)

    return subordinate(c_slab), subordinate(d_slab)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def region_to_json(A: Region) -> list:
    return [list(s) for s in sorted(A)]


def region_from_json(data) -> Region:
    return region(tuple(s) for s in data)


def tiling_to_json(t: Tiling) -> dict:
    return {
        "D": t.pixel_side,
        "kappa": t.kappa,
        "anchors": [list(a) for a in t.anchors],
    }
