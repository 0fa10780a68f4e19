"""Incremental Bowyer-Watson Delaunay triangulation in the plane."""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..exceptions import DegenerateGeometryError, InsufficientPointsError

_INCIRCLE_EPS = 1e-12
_SUPER_RADIUS = 1e3


@dataclass
class DelaunayGraph:
    points: np.ndarray
    edges: np.ndarray  # (m, 2) sorted index pairs, lexicographic order
    triangles: np.ndarray  # (t, 3) counter-clockwise index triples
    duplicates: dict = field(default_factory=dict)

    def neighbors(self):
        """Adjacency list (sorted) for every point."""
        adj = [[] for _ in range(len(self.points))]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]


def _merge_duplicates(points, tol):
    """Map every point to the lowest index within ``tol`` of it."""
    n = len(points)
    parent = np.arange(n)
    pairs = cKDTree(points).query_pairs(r=tol, output_type="ndarray") if n else np.empty((0, 2), int)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(n)], dtype=np.int64)


def _check_extent(points):
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[0] == 0.0 or s[1] <= 1e-12 * s[0]:
        raise DegenerateGeometryError("points are collinear; no 2-D triangulation exists")


def _incircle(P, tri_pts, q):
    """Sign test: positive where ``q`` lies strictly inside each circumcircle."""
    d = tri_pts - q
    lift = np.einsum("tij,tij->ti", d, d)
    ax, ay, bx, by, cx, cy = d[:, 0, 0], d[:, 0, 1], d[:, 1, 0], d[:, 1, 1], d[:, 2, 0], d[:, 2, 1]
    det = (
        lift[:, 0] * (bx * cy - by * cx)
        + lift[:, 1] * (cx * ay - cy * ax)
        + lift[:, 2] * (ax * by - ay * bx)
    )
    perm = (
        lift[:, 0] * (np.abs(bx * cy) + np.abs(by * cx))
        + lift[:, 1] * (np.abs(cx * ay) + np.abs(cy * ax))
        + lift[:, 2] * (np.abs(ax * by) + np.abs(ay * bx))
    )
    return det > _INCIRCLE_EPS * perm, det / np.where(perm > 0, perm, 1.0)


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
        c[..., 0] - a[..., 0]
    )


def _bowyer_watson(P):
    """Triangulate distinct points ``P`` (already scaled to the unit box)."""
    n = len(P)
    center = np.array([0.5, 0.5])
    angles = np.deg2rad([90.0, 210.0, 330.0])
    sup = center + _SUPER_RADIUS * np.c_[np.cos(angles), np.sin(angles)]
    V = np.vstack([P, sup])
    cap = 2 * n + 16
    tris = np.empty((cap, 3), dtype=np.int64)
    alive = np.zeros(cap, dtype=bool)
    tris[0] = (n, n + 1, n + 2)
    alive[0] = True
    count = 1

    for p in range(n):
        q = V[p]
        idx = np.flatnonzero(alive[:count])
        cand = tris[idx]
        inside, score = _incircle(V, V[cand], q)
        bad = idx[inside]
        if len(bad) == 0:
            bad = idx[[int(np.argmax(score))]]
        # keep the connected component around the triangle containing q
        bt = tris[bad]
        o = np.stack(
            [
                _orient(V[bt[:, 0]], V[bt[:, 1]], q),
                _orient(V[bt[:, 1]], V[bt[:, 2]], q),
                _orient(V[bt[:, 2]], V[bt[:, 0]], q),
            ],
            axis=1,
        )
        seed = int(np.argmax(o.min(axis=1)))
        edge_sets = [
            {(min(a, b), max(a, b)) for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
            for t in bt.tolist()
        ]
        keep = {seed}
        frontier = [seed]
        while frontier:
            cur = frontier.pop()
            for other in range(len(bad)):
                if other not in keep and edge_sets[cur] & edge_sets[other]:
                    keep.add(other)
                    frontier.append(other)
        keep = sorted(keep)
        directed = []
        counts = {}
        for k in keep:
            a, b, c = bt[k].tolist()
            for e in ((a, b), (b, c), (c, a)):
                directed.append(e)
                key = (min(e), max(e))
                counts[key] = counts.get(key, 0) + 1
        alive[bad[keep]] = False
        boundary = [e for e in directed if counts[(min(e), max(e))] == 1]
        need = count + len(boundary)
        if need > cap:
            cap = max(2 * cap, need)
            tris = np.resize(tris, (cap, 3))
            alive = np.resize(alive, cap)
            alive[count:] = False
        for a, b in boundary:
            tris[count] = (a, b, p)
            alive[count] = True
            count += 1
        if count > 4 * (alive[:count].sum() + 8):
            live = np.flatnonzero(alive[:count])
            tris[: len(live)] = tris[live]
            alive[:] = False
            alive[: len(live)] = True
            count = len(live)

    out = tris[:count][alive[:count]]
    out = out[np.all(out < n, axis=1)]
    return out


def delaunay_triangulate(points, dedup_tol=1e-12):
    """Delaunay triangulation with lowest-index tie-breaking.

    Points are inserted in index order and an insertion only destroys
    triangles whose circumcircle *strictly* contains the new point, so
    co-circular ties keep the diagonal formed by earlier (lower) indices.

    Raises
    ------
    InsufficientPointsError
        Fewer than three distinct points.
    DegenerateGeometryError
        All points collinear.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateGeometryError(f"points must have shape (n, 2), got {pts.shape}")
    if len(pts) < 3:
        raise InsufficientPointsError(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateGeometryError("points contain non-finite coordinates")
    rep = _merge_duplicates(pts, dedup_tol)
    uniq = np.flatnonzero(rep == np.arange(len(pts)))
    if len(uniq) < 3:
        raise InsufficientPointsError(f"need at least 3 distinct points, got {len(uniq)}")
    U = pts[uniq]
    _check_extent(U)
    lo = U.min(axis=0)
    scale = float((U.max(axis=0) - lo).max())
    local = _bowyer_watson((U - lo) / scale)
    triangles = uniq[local]
    triangles = triangles[np.lexsort(triangles.T[::-1])] if len(triangles) else triangles.reshape(0, 3)

    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    edge_set = {tuple(x) for x in e.tolist()}
    duplicates = {}
    if len(uniq) < len(pts):
        adj = {}
        for i, j in edge_set:
            adj.setdefault(i, set()).add(j)
            adj.setdefault(j, set()).add(i)
        for d in np.flatnonzero(rep != np.arange(len(pts))).tolist():
            r = int(rep[d])
            duplicates[d] = r
            edge_set.add((r, d))
            for x in adj.get(r, ()):
                edge_set.add((min(d, x), max(d, x)))
    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    return DelaunayGraph(points=pts, edges=edges, triangles=triangles, duplicates=duplicates)
