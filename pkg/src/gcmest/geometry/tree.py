from __future__ import annotations

import networkx as nx
import numpy as np

from .base import GeometryError, InvalidPointError, Space, SpaceSpec

_OFFSET_TOL = 1e-12


class MetricTree(Space):
    """Finite weighted tree with its path metric.

    A point is ``(edge id, offset)`` with the offset measured from the
    lower-id endpoint of the edge. A point sitting on a node is stored as
    (smallest incident edge id, offset of that node on the edge), so equal
    points have equal encodings. Riemannian operations are not available.
    """

    has_tangent = False

    def __init__(self, spec: SpaceSpec) -> None:
        super().__init__(spec)
        self.point_shape = (2,)
        tree = spec.tree
        g = nx.Graph()
        g.add_nodes_from(tree.nodes)
        for i, (u, v, w) in enumerate(tree.edges):
            if not w > 0:
                raise GeometryError(f"edge {i} has non-positive length {w}")
            if u == v or g.has_edge(u, v):
                raise GeometryError(f"edge {i} is a loop or a duplicate")
            g.add_edge(u, v, weight=w, eid=i)
        if not nx.is_tree(g):
            raise GeometryError("edge set must be connected and acyclic")
        self.graph = g
        self.node_ids = list(tree.nodes)
        self._nidx = {n: i for i, n in enumerate(self.node_ids)}
        self.lo = np.array([self._nidx[min(u, v)] for u, v, _ in tree.edges])
        self.hi = np.array([self._nidx[max(u, v)] for u, v, _ in tree.edges])
        self.length = np.array([w for _, _, w in tree.edges], dtype=float)
        nn = len(self.node_ids)
        self.node_dist = np.zeros((nn, nn))
        for src, lengths in nx.all_pairs_dijkstra_path_length(g):
            for dst, d in lengths.items():
                self.node_dist[self._nidx[src], self._nidx[dst]] = d
        self.incident = {
            n: sorted(g.edges[n, m]["eid"] for m in g.neighbors(n)) for n in self.node_ids
        }

    # -- encoding ---------------------------------------------------------
    def node_point(self, node) -> np.ndarray:
        e = self.incident[node][0]
        ni = self._nidx[node]
        return np.array([float(e), 0.0 if self.lo[e] == ni else self.length[e]])

    def canonical(self, x) -> np.ndarray:
        e = int(round(float(x[0])))
        o = float(x[1])
        if e < 0 or e >= len(self.length):
            raise InvalidPointError(f"edge id {x[0]} out of range")
        length = self.length[e]
        if o < -_OFFSET_TOL * length or o > length * (1 + _OFFSET_TOL):
            raise InvalidPointError(f"offset {o} outside edge {e} of length {length}")
        if o <= _OFFSET_TOL * length:
            return self.node_point(self.node_ids[self.lo[e]])
        if o >= length * (1 - _OFFSET_TOL):
            return self.node_point(self.node_ids[self.hi[e]])
        return np.array([float(e), o])

    def _check_point(self, x):
        if abs(x[0] - round(x[0])) > 0:
            raise InvalidPointError("edge id must be an integer")
        self.canonical(x)

    # -- metric -----------------------------------------------------------
    def _ends(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        e = np.rint(pts[:, 0]).astype(int)
        o = pts[:, 1]
        return e, o, self.length[e] - o

    def dist(self, x, y):
        batched = self.is_batch(y)
        ex, ox, rx = self._ends(x)
        ey, oy, ry = self._ends(y)
        nd = self.node_dist
        lo_x, hi_x, lo_y, hi_y = self.lo[ex], self.hi[ex], self.lo[ey], self.hi[ey]
        d = np.minimum.reduce(
            [
                ox + nd[lo_x, lo_y] + oy,
                ox + nd[lo_x, hi_y] + ry,
                rx + nd[hi_x, lo_y] + oy,
                rx + nd[hi_x, hi_y] + ry,
            ]
        )
        d = np.where(ey == ex, np.abs(oy - ox), d)
        return d if batched else float(d[0])

    def _path(self, x, y):
        """Polyline from ``x`` to ``y`` as a list of (edge, start offset, end offset)."""
        ex, ox = int(round(x[0])), float(x[1])
        ey, oy = int(round(y[0])), float(y[1])
        if ex == ey:
            return [(ex, ox, oy)]
        lx, hx, ly, hy = self.lo[ex], self.hi[ex], self.lo[ey], self.hi[ey]
        rx, ry = self.length[ex] - ox, self.length[ey] - oy
        nd = self.node_dist
        combos = [
            (ox + nd[lx, ly] + oy, lx, ly),
            (ox + nd[lx, hy] + ry, lx, hy),
            (rx + nd[hx, ly] + oy, hx, ly),
            (rx + nd[hx, hy] + ry, hx, hy),
        ]
        _, u, v = min(combos, key=lambda c: c[0])
        segs = [(ex, ox, 0.0 if u == lx else self.length[ex])]
        nodes = nx.shortest_path(self.graph, self.node_ids[u], self.node_ids[v], weight="weight")
        for a, b in zip(nodes[:-1], nodes[1:]):
            e = self.graph.edges[a, b]["eid"]
            start = 0.0 if self._nidx[a] == self.lo[e] else self.length[e]
            segs.append((e, start, self.length[e] - start))
        segs.append((ey, 0.0 if v == ly else self.length[ey], oy))
        return [s for s in segs if s[1] != s[2]] or [(ex, ox, ox)]

    def geodesic_point(self, x, y, t):
        x = self.canonical(x)
        y = self.canonical(y)
        t = np.asarray(t, dtype=float)
        segs = self._path(x, y)
        total = sum(abs(b - a) for _, a, b in segs)
        out = []
        for tk in np.atleast_1d(t):
            remaining = float(tk) * total
            pt = None
            for e, a, b in segs:
                seg = abs(b - a)
                if remaining <= seg:
                    pt = np.array([float(e), a + np.sign(b - a) * remaining])
                    break
                remaining -= seg
            if pt is None:
                pt = y
            out.append(self.canonical(pt))
        return out[0] if t.ndim == 0 else np.array(out)

    def walk(self, start, distance: float, rng: np.random.Generator) -> np.ndarray | None:
        """Random walk of the given length from ``start``.

        The initial direction and each branch taken at a node are uniform
        over the available directions. Returns ``None`` when the walk runs
        into a leaf before covering ``distance``.
        """
        x = self.canonical(start)
        e, o = int(x[0]), float(x[1])
        length = self.length[e]
        if 0.0 < o < length:
            forward = rng.random() < 0.5
            to_end = length - o if forward else o
            if distance <= to_end:
                return self.canonical([e, o + distance if forward else o - distance])
            distance -= to_end
            node = self.node_ids[self.hi[e] if forward else self.lo[e]]
            came_from = e
        else:
            node = self.node_ids[self.lo[e] if o == 0.0 else self.hi[e]]
            came_from = None
        while True:
            options = [k for k in self.incident[node] if k != came_from]
            if not options:
                return None
            k = options[int(rng.integers(len(options)))]
            ni = self._nidx[node]
            if distance <= self.length[k]:
                off = distance if self.lo[k] == ni else self.length[k] - distance
                return self.canonical([k, off])
            distance -= self.length[k]
            node = self.node_ids[self.hi[k] if self.lo[k] == ni else self.lo[k]]
            came_from = k

    def random_point(self, rng, scale=1.0):
        e = int(rng.integers(len(self.length)))
        return self.canonical([e, rng.uniform(0.0, self.length[e])])
