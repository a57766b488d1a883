"""Layouts used by the wireless environments."""

from __future__ import annotations

import numpy as np


def line_edges(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


def grid_positions(rows: int, cols: int, spacing: float = 1.0) -> np.ndarray:
    """Row-major node coordinates; node r*cols + c sits at (c, r) * spacing."""
    return np.array([(c * spacing, r * spacing) for r in range(rows) for c in range(cols)], dtype=float)


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    """4-neighbor adjacency on a rows x cols grid, nodes in row-major order."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                edges.append((n, n + 1))
            if r + 1 < rows:
                edges.append((n, n + cols))
    return edges


def line_positions(n: int, spacing: float = 1.0) -> np.ndarray:
    return np.array([(i * spacing, 0.0) for i in range(n)], dtype=float)


def line_availability(n_nodes: int) -> list[list[int]]:
    """Access points sit between consecutive nodes: node n reaches APs n-1 and n."""
    return [[m for m in (n - 1, n) if 0 <= m < n_nodes - 1] for n in range(n_nodes)]


def grid_availability(rows: int, cols: int) -> list[list[int]]:
    """One access point in each unit cell, reachable from the cell's four corner nodes."""
    ap_cols = cols - 1
    out = []
    for r in range(rows):
        for c in range(cols):
            aps = []
            for ar in (r - 1, r):
                for ac in (c - 1, c):
                    if 0 <= ar < rows - 1 and 0 <= ac < cols - 1:
                        aps.append(ar * ap_cols + ac)
            out.append(sorted(aps))
    return out
