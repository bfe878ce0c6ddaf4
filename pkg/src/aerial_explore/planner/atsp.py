"""Open-path routing through frontier centroids.

The tour starts at the robot (node 0) and every edge back into node 0 costs
zero, so the optimal closed tour minus its return edge is the optimal open
path.
"""

import logging
from typing import List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

N_EXACT = 12
MAX_STARTS = 12


def build_atsp_cost(robot, centroids) -> np.ndarray:
    robot = np.asarray(robot, dtype=float).reshape(2)
    centroids = np.asarray(centroids, dtype=float).reshape(-1, 2)
    if len(centroids) == 0:
        raise ValueError("need at least one centroid")
    points = np.vstack([robot, centroids])
    C = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    C[1:, 0] = 0.0
    return C


def path_cost(C: np.ndarray, order: Sequence[int]) -> float:
    """Cost of the open path 0 -> order[0] -> order[1] -> ..."""

    nodes = [0] + list(order)
    return float(sum(C[a, b] for a, b in zip(nodes[:-1], nodes[1:])))


def solve_atsp_exact(C: np.ndarray) -> List[int]:
    """Held-Karp over subsets of frontier nodes, one popcount layer at a time"""

    n = len(C) - 1
    D = C[1:, 1:]
    full = (1 << n) - 1
    dp = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=int)
    bits = 1 << np.arange(n)
    dp[bits, np.arange(n)] = C[0, 1:]

    masks = np.arange(1 << n)
    popcount = np.zeros(1 << n, dtype=int)
    for k in range(n):
        popcount += (masks >> k) & 1

    for size in range(2, n + 1):
        layer = masks[popcount == size]
        for k in range(n):
            with_k = layer[(layer & bits[k]) != 0]
            prev = with_k ^ bits[k]
            totals = dp[prev] + D[:, k][None, :]
            best = np.argmin(totals, axis=1)
            dp[with_k, k] = totals[np.arange(len(with_k)), best]
            parent[with_k, k] = best

    last = int(np.argmin(dp[full]))
    order = []
    mask = full
    while last != -1:
        order.append(last + 1)
        prev_last = parent[mask, last]
        mask ^= 1 << last
        last = int(prev_last)
    return order[::-1]


def _nearest_neighbor(C: np.ndarray, first: int) -> List[int]:
    n = len(C) - 1
    order = [first]
    left = set(range(1, n + 1)) - {first}
    while left:
        current = order[-1]
        nxt = min(left, key=lambda j: (C[current, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def _two_opt(C: np.ndarray, path: List[int]) -> bool:
    """Best-improvement segment reversal on the open path (node 0 fixed)"""

    p = np.asarray(path)
    m = len(p)
    for i in range(1, m - 1):
        j = np.arange(i + 1, m)
        before = C[p[i - 1], p[i]] + np.where(
            j + 1 < m, C[p[j], p[np.minimum(j + 1, m - 1)]], 0.0
        )
        after = C[p[i - 1], p[j]] + np.where(
            j + 1 < m, C[p[i], p[np.minimum(j + 1, m - 1)]], 0.0
        )
        gain = before - after
        best = int(np.argmax(gain))
        if gain[best] > 1e-9:
            jj = int(j[best])
            path[i : jj + 1] = path[i : jj + 1][::-1]
            return True
    return False


def _or_opt(C: np.ndarray, path: List[int]) -> bool:
    """Move a run of 1-3 nodes (possibly reversed) to a cheaper position"""

    m = len(path)
    for length in (1, 2, 3):
        for i in range(1, m - length + 1):
            seg = path[i : i + length]
            a, b = path[i - 1], path[i + length] if i + length < m else None
            removed = C[a, seg[0]] + (C[seg[-1], b] if b is not None else 0.0)
            if b is not None:
                removed -= C[a, b]
            rest = path[:i] + path[i + length :]
            for k in range(len(rest)):
                if k == i - 1:
                    continue
                u = rest[k]
                v = rest[k + 1] if k + 1 < len(rest) else None
                for head, tail in ((seg[0], seg[-1]), (seg[-1], seg[0])):
                    added = C[u, head] + (C[tail, v] if v is not None else 0.0)
                    if v is not None:
                        added -= C[u, v]
                    if added < removed - 1e-9:
                        moved = seg if head == seg[0] else seg[::-1]
                        path[:] = rest[: k + 1] + moved + rest[k + 1 :]
                        return True
    return False


def solve_atsp_heuristic(C: np.ndarray) -> List[int]:
    """Multi-start nearest neighbor, improved by 2-opt and or-opt"""

    n = len(C) - 1
    firsts = sorted(range(1, n + 1), key=lambda j: (C[0, j], j))[:MAX_STARTS]
    best_order, best_cost = None, np.inf
    for first in firsts:
        path = [0] + _nearest_neighbor(C, first)
        improved = True
        while improved:
            improved = _two_opt(C, path) or _or_opt(C, path)
        cost = path_cost(C, path[1:])
        if cost < best_cost - 1e-12:
            best_order, best_cost = path[1:], cost
    return best_order


def solve_atsp(C: np.ndarray, n_exact: int = N_EXACT) -> List[int]:
    """Visit order of nodes 1..N for the cheapest open path from node 0"""

    C = np.asarray(C, dtype=float)
    n = len(C) - 1
    if n < 1:
        raise ValueError("cost matrix has no frontier nodes")
    if n == 1:
        return [1]
    if n <= n_exact:
        return solve_atsp_exact(C)
    logger.debug("routing %d nodes heuristically", n)
    return solve_atsp_heuristic(C)
