"""R-Tree over host locations (Guttman, quadratic split) with the three
search phases used by the spatial strategy: containing leaves, nearest
leaves by MinDist, and concentric rings."""

from __future__ import annotations

import heapq
import math
from typing import Iterable, Iterator, NamedTuple

from .model import IdentifierError, Location

# leaves whose MinDist differs by less than this are treated as tied
TIE_EPS = 1e-9


class Mbr(NamedTuple):
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @classmethod
    def point(cls, x: float, y: float) -> "Mbr":
        return cls(x, y, x, y)

    @classmethod
    def covering(cls, rects: Iterable["Mbr"]) -> "Mbr":
        it = iter(rects)
        first = next(it)
        x0, y0, x1, y1 = first
        for r in it:
            if r.min_x < x0:
                x0 = r.min_x
            if r.min_y < y0:
                y0 = r.min_y
            if r.max_x > x1:
                x1 = r.max_x
            if r.max_y > y1:
                y1 = r.max_y
        return cls(x0, y0, x1, y1)

    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)

    def margin(self) -> float:
        return (self.max_x - self.min_x) + (self.max_y - self.min_y)

    def union(self, other: "Mbr") -> "Mbr":
        return Mbr(
            min(self.min_x, other.min_x),
            min(self.min_y, other.min_y),
            max(self.max_x, other.max_x),
            max(self.max_y, other.max_y),
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def contains(self, other: "Mbr") -> bool:
        return (
            self.min_x <= other.min_x
            and self.min_y <= other.min_y
            and other.max_x <= self.max_x
            and other.max_y <= self.max_y
        )

    def intersects(self, other: "Mbr") -> bool:
        return (
            self.min_x <= other.max_x
            and other.min_x <= self.max_x
            and self.min_y <= other.max_y
            and other.min_y <= self.max_y
        )


def min_dist(loc: Location, rect: Mbr) -> float:
    """Euclidean distance from ``loc`` to the closest point of ``rect``."""
    dx = max(rect.min_x - loc.x, 0.0, loc.x - rect.max_x)
    dy = max(rect.min_y - loc.y, 0.0, loc.y - rect.max_y)
    return math.hypot(dx, dy)


def max_dist(loc: Location, rect: Mbr) -> float:
    """Distance from ``loc`` to the farthest corner of ``rect``."""
    dx = max(abs(loc.x - rect.min_x), abs(loc.x - rect.max_x))
    dy = max(abs(loc.y - rect.min_y), abs(loc.y - rect.max_y))
    return math.hypot(dx, dy)


class _Entry:
    __slots__ = ("host_id", "x", "y", "mbr")

    def __init__(self, host_id: int, x: float, y: float):
        self.host_id = host_id
        self.x = x
        self.y = y
        self.mbr = Mbr(x, y, x, y)


class _Node:
    __slots__ = ("leaf", "children", "mbr", "parent")

    def __init__(self, leaf: bool, children=None, parent=None):
        self.leaf = leaf
        self.children = list(children or ())
        self.parent = parent
        self.mbr = Mbr.covering(c.mbr for c in self.children) if self.children else None
        if not leaf:
            for c in self.children:
                c.parent = self

    def refresh(self) -> None:
        self.mbr = Mbr.covering(c.mbr for c in self.children)


def _grow(a: Mbr, b: Mbr) -> tuple[float, float]:
    """(area, margin) enlargement of ``a`` needed to cover ``b``."""
    u = a.union(b)
    return u.area() - a.area(), u.margin() - a.margin()


def _quadratic_split(items: list, min_children: int) -> tuple[list, list]:
    # PickSeeds: the pair wasting the most area (margin breaks ties for
    # degenerate, zero-area point sets)
    best = None
    seeds = (0, 1)
    n = len(items)
    for a in range(n - 1):
        ra = items[a].mbr
        area_a, margin_a = ra.area(), ra.margin()
        for b in range(a + 1, n):
            rb = items[b].mbr
            u = ra.union(rb)
            waste = (u.area() - area_a - rb.area(), u.margin() - margin_a - rb.margin())
            if best is None or waste > best:
                best = waste
                seeds = (a, b)
    g1 = [items[seeds[0]]]
    g2 = [items[seeds[1]]]
    r1 = g1[0].mbr
    r2 = g2[0].mbr
    rest = [it for idx, it in enumerate(items) if idx not in seeds]

    while rest:
        if len(g1) + len(rest) == min_children:
            g1.extend(rest)
            break
        if len(g2) + len(rest) == min_children:
            g2.extend(rest)
            break
        # PickNext: strongest preference for one group
        pick = 0
        pick_diff = None
        pick_d = None
        for idx, it in enumerate(rest):
            d1 = _grow(r1, it.mbr)
            d2 = _grow(r2, it.mbr)
            diff = (abs(d1[0] - d2[0]), abs(d1[1] - d2[1]))
            if pick_diff is None or diff > pick_diff:
                pick, pick_diff, pick_d = idx, diff, (d1, d2)
        it = rest.pop(pick)
        d1, d2 = pick_d
        if d1 != d2:
            to_first = d1 < d2
        elif (r1.area(), r1.margin()) != (r2.area(), r2.margin()):
            to_first = (r1.area(), r1.margin()) < (r2.area(), r2.margin())
        else:
            to_first = len(g1) <= len(g2)
        if to_first:
            g1.append(it)
            r1 = r1.union(it.mbr)
        else:
            g2.append(it)
            r2 = r2.union(it.mbr)
    return g1, g2


class RTree:
    """Point R-Tree keyed by host id.

    ``node_visits`` counts node MBR tests performed by queries; callers use
    it to charge search cost.
    """

    def __init__(self, max_children: int = 40, min_children: int = 20):
        if max_children < 2:
            raise ValueError("max_children must be >= 2")
        if not 1 <= min_children <= max_children // 2:
            raise ValueError("min_children must lie in [1, max_children // 2]")
        self.max_children = max_children
        self.min_children = min_children
        self.root = _Node(leaf=True)
        self._locations: dict[int, Location] = {}
        self.node_visits = 0

    @classmethod
    def build(cls, items: Iterable[tuple[int, Location]], max_children: int = 40, min_children: int = 20):
        tree = cls(max_children, min_children)
        for host_id, loc in items:
            tree.insert(host_id, loc)
        return tree

    def __len__(self) -> int:
        return len(self._locations)

    def __contains__(self, host_id: int) -> bool:
        return host_id in self._locations

    @property
    def height(self) -> int:
        h = 1
        node = self.root
        while not node.leaf:
            node = node.children[0]
            h += 1
        return h

    def location(self, host_id: int) -> Location:
        return self._locations[host_id]

    # maintenance

    def insert(self, host_id: int, location: Location) -> "RTree":
        if host_id in self._locations:
            raise IdentifierError(f"host {host_id} already indexed")
        self._locations[host_id] = location
        entry = _Entry(host_id, location.x, location.y)
        leaf = self._choose_leaf(entry.mbr)
        leaf.children.append(entry)
        leaf.mbr = entry.mbr if leaf.mbr is None else leaf.mbr.union(entry.mbr)
        split = self._split(leaf) if len(leaf.children) > self.max_children else None
        self._adjust(leaf, split)
        return self

    def _choose_leaf(self, rect: Mbr) -> _Node:
        node = self.root
        while not node.leaf:
            best = None
            best_key = None
            for child in node.children:
                grow = _grow(child.mbr, rect)
                key = (grow[0], child.mbr.area(), grow[1])
                if best_key is None or key < best_key:
                    best, best_key = child, key
            node = best
        return node

    def _split(self, node: _Node) -> _Node:
        g1, g2 = _quadratic_split(node.children, self.min_children)
        node.children = g1
        node.refresh()
        sibling = _Node(leaf=node.leaf, children=g2, parent=node.parent)
        if not node.leaf:
            for c in g1:
                c.parent = node
        return sibling

    def _adjust(self, node: _Node, sibling: _Node | None) -> None:
        while node is not self.root:
            parent = node.parent
            if sibling is not None:
                sibling.parent = parent
                parent.children.append(sibling)
            parent.refresh()
            if sibling is not None and len(parent.children) > self.max_children:
                sibling = self._split(parent)
            else:
                sibling = None
            node = parent
        if sibling is not None:
            self.root = _Node(leaf=False, children=[node, sibling])

    # traversal helpers

    def leaves(self) -> Iterator[_Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.leaf:
                if node.children:
                    yield node
            else:
                stack.extend(reversed(node.children))

    @staticmethod
    def leaf_hosts(leaf: _Node) -> list[int]:
        return [e.host_id for e in leaf.children]

    def containing_leaves(self, loc: Location) -> list[_Node]:
        out = []
        if self.root.mbr is None:
            return out
        stack = [self.root]
        while stack:
            node = stack.pop()
            self.node_visits += 1
            if not node.mbr.contains_point(loc.x, loc.y):
                continue
            if node.leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def nearest_leaves(self, loc: Location, exclude: Iterable[_Node] = ()) -> list[_Node]:
        """Leaves (other than ``exclude``) at minimal MinDist from ``loc``."""
        if self.root.mbr is None:
            return []
        skip = {id(n) for n in exclude}
        heap = [(min_dist(loc, self.root.mbr), 0, self.root)]
        seq = 1
        best = None
        out = []
        while heap:
            d, _, node = heapq.heappop(heap)
            if best is not None and d > best + TIE_EPS:
                break
            self.node_visits += 1
            if node.leaf:
                if id(node) in skip:
                    continue
                if best is None:
                    best = d
                out.append(node)
            else:
                for child in node.children:
                    heapq.heappush(heap, (min_dist(loc, child.mbr), seq, child))
                    seq += 1
        return out

    # the three search phases

    def mbr_nodes(self, loc: Location) -> list[int]:
        """Hosts of every leaf whose MBR contains ``loc``."""
        return sorted(h for leaf in self.containing_leaves(loc) for h in self.leaf_hosts(leaf))

    def nearest_mbr_nodes(self, loc: Location) -> list[int]:
        """Hosts of the leaves nearest to ``loc`` by MinDist, ties included,
        skipping leaves that contain ``loc``."""
        inside = self.containing_leaves(loc)
        near = self.nearest_leaves(loc, exclude=inside)
        return sorted(h for leaf in near for h in self.leaf_hosts(leaf))

    def visited_leaves(self, loc: Location) -> list[_Node]:
        """Leaves consumed by the first two phases for ``loc``."""
        inside = self.containing_leaves(loc)
        return inside + self.nearest_leaves(loc, exclude=inside)

    def concentric_search(
        self,
        loc: Location,
        ring_index: int,
        step: float,
        visited: Iterable[_Node] | None = None,
    ) -> list[int]:
        """Hosts at distance in [(ring_index-1)*step, ring_index*step) from
        ``loc``, drawn from leaves outside ``visited`` (default: the leaves of
        the first two phases)."""
        if ring_index < 1:
            raise ValueError("ring_index must be >= 1")
        if step <= 0:
            raise ValueError("step must be positive")
        if self.root.mbr is None:
            return []
        if visited is None:
            visited = self.visited_leaves(loc)
        skip = {id(n) for n in visited}
        lo = (ring_index - 1) * step
        hi = ring_index * step
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            self.node_visits += 1
            if min_dist(loc, node.mbr) >= hi or max_dist(loc, node.mbr) < lo:
                continue
            if node.leaf:
                if id(node) in skip:
                    continue
                for e in node.children:
                    d = math.hypot(e.x - loc.x, e.y - loc.y)
                    if lo <= d < hi:
                        out.append(e.host_id)
            else:
                stack.extend(node.children)
        return sorted(out)

    def reach(self, loc: Location) -> float:
        """Distance from ``loc`` to the farthest corner of the root MBR."""
        return 0.0 if self.root.mbr is None else max_dist(loc, self.root.mbr)

    # plain spatial queries

    def search(self, rect: Mbr) -> list[int]:
        """Hosts whose location lies inside ``rect`` (boundary included)."""
        out = []
        if self.root.mbr is None:
            return out
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.mbr.intersects(rect):
                continue
            if node.leaf:
                out.extend(e.host_id for e in node.children if rect.contains_point(e.x, e.y))
            else:
                stack.extend(node.children)
        return sorted(out)

    def point_query(self, loc: Location) -> list[int]:
        return self.search(Mbr.point(loc.x, loc.y))

    def audit(self) -> list[str]:
        """Structural check: fan-out bounds, tight MBRs, parent links, uniform height."""
        problems = []
        depths = set()
        count = 0

        def walk(node: _Node, depth: int):
            nonlocal count
            n = len(node.children)
            if node is not self.root and not self.min_children <= n <= self.max_children:
                problems.append(f"node at depth {depth} has {n} children")
            if node is self.root and n > self.max_children:
                problems.append(f"root has {n} children")
            if node is self.root and not node.leaf and n < 2:
                problems.append("internal root with fewer than two children")
            if n and node.mbr != Mbr.covering(c.mbr for c in node.children):
                problems.append(f"node at depth {depth} has a loose or wrong MBR")
            if node.leaf:
                depths.add(depth)
                count += n
            else:
                for c in node.children:
                    if c.parent is not node:
                        problems.append(f"broken parent link at depth {depth + 1}")
                    if not node.mbr.contains(c.mbr):
                        problems.append(f"child MBR escapes parent at depth {depth}")
                    walk(c, depth + 1)

        walk(self.root, 1)
        if len(depths) > 1:
            problems.append(f"leaves at multiple depths {sorted(depths)}")
        if count != len(self._locations):
            problems.append(f"tree holds {count} entries, {len(self._locations)} registered")
        return problems
