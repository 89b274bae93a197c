"""Independent brute-force references used by unit and acceptance tests."""

from __future__ import annotations

import math

from edgeplace.model import Location
from edgeplace.spatial import TIE_EPS, RTree


def clamp_dist(loc, rect):
    cx = min(max(loc.x, rect.min_x), rect.max_x)
    cy = min(max(loc.y, rect.min_y), rect.max_y)
    return math.hypot(loc.x - cx, loc.y - cy)


def scan_rect(points, rect):
    return sorted(h for h, p in points.items() if rect.min_x <= p.x <= rect.max_x and rect.min_y <= p.y <= rect.max_y)


def scan_mbr_nodes(tree: RTree, loc):
    leaves = [lf for lf in tree.leaves() if lf.mbr.contains_point(loc.x, loc.y)]
    return sorted(h for lf in leaves for h in tree.leaf_hosts(lf)), leaves


def scan_nearest(tree: RTree, loc):
    inside = {id(lf) for lf in tree.leaves() if lf.mbr.contains_point(loc.x, loc.y)}
    rest = [lf for lf in tree.leaves() if id(lf) not in inside]
    if not rest:
        return [], []
    d = [clamp_dist(loc, lf.mbr) for lf in rest]
    best = min(d)
    near = [lf for lf, v in zip(rest, d) if v <= best + TIE_EPS]
    return sorted(h for lf in near for h in tree.leaf_hosts(lf)), near


def scan_ring(tree: RTree, loc, ring, step, visited):
    skip = {h for lf in visited for h in tree.leaf_hosts(lf)}
    lo, hi = (ring - 1) * step, ring * step
    out = []
    for lf in tree.leaves():
        for h in tree.leaf_hosts(lf):
            d = tree.location(h).distance_to(loc)
            if h not in skip and lo <= d < hi:
                out.append(h)
    return sorted(out)


def random_points(rng, n, extent=1000.0):
    xy = rng.uniform(0, extent, size=(n, 2))
    return {j: Location(float(x), float(y)) for j, (x, y) in enumerate(xy)}


def phase_partition(tree: RTree, loc, step):
    """Every host id produced by the three phases, with multiplicity."""
    got = list(tree.mbr_nodes(loc)) + list(tree.nearest_mbr_nodes(loc))
    rings = int(math.ceil(tree.reach(loc) / step)) + 1
    for r in range(1, rings + 1):
        got.extend(tree.concentric_search(loc, r, step))
    return got
