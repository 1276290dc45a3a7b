"""Independent brute-force oracles used by the test suite.

These deliberately avoid the package's own data structures and
shortcuts (no grid hash, no seed lists): plain O(n^2) definitions
straight from the textbook semantics, kept simple enough to audit by
eye.
"""

import numpy as np

NOISE = -1


def brute_dbscan(positions, eps, min_pts):
    """O(n^2) DBSCAN; returns (labels, core_flags)."""
    pts = np.asarray(positions, dtype=float)
    n = len(pts)
    if n == 0:
        return [], []
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    neigh = [np.flatnonzero(d2[i] <= eps * eps).tolist() for i in range(n)]
    core = [len(neigh[i]) >= min_pts for i in range(n)]
    labels = [NOISE] * n
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        stack = list(neigh[i])
        while stack:
            j = stack.pop(0)
            if labels[j] == NOISE:
                labels[j] = cluster
                if core[j]:
                    stack.extend(neigh[j])
        cluster += 1
    return labels, core


def core_partition(labels, core):
    """Frozen set-of-sets of core point indices per cluster."""
    groups = {}
    for i, (lab, is_core) in enumerate(zip(labels, core)):
        if is_core and lab != NOISE:
            groups.setdefault(lab, set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


def brute_buffer_survival(frames, frame_index, point_index, radius, min_support):
    """Survival predicate for one point: >= min_support points within
    radius across all subsequent frames."""
    p = frames[frame_index][1][point_index]
    pos = np.array([p.x, p.y, p.z])
    support = 0
    for _, pts in frames[frame_index + 1:]:
        for q in pts:
            if np.linalg.norm(pos - np.array([q.x, q.y, q.z])) <= radius:
                support += 1
    return support >= min_support


def reference_hysteresis(sequence, h_on, h_off):
    """Occupancy after each tick, computed from the raw history: a cell
    turns on when the last h_on ticks were all present, off when the
    last h_off were all absent."""
    out = []
    occupied = False
    history = []
    for present in sequence:
        history.append(present)
        if not occupied and len(history) >= h_on and all(history[-h_on:]):
            occupied = True
            history = []
        elif occupied and len(history) >= h_off and not any(history[-h_off:]):
            occupied = False
            history = []
        out.append(occupied)
    return out
