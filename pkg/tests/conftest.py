"""Shared fixtures and independent oracles for the test suite."""

import itertools

import numpy as np
import pytest

import lipfree as lf


def line_space(positions, base=0):
    """1D space from explicit positions on the real line."""
    pos = np.asarray(positions, dtype=float)
    d = np.abs(pos[:, None] - pos[None, :])
    return lf.FiniteMetricSpace(tuple(f"p{i}" for i in range(len(pos))), d, base_index=base)


def lip_ball_vertices(d_a: np.ndarray, base_pos: int) -> np.ndarray:
    """All extreme points of {f : f(base)=0, |f(i)-f(j)| <= d(i,j)}.

    Enumerated by intersecting every choice of q facets of the defining
    polytope (q = number of non-base points) and keeping the feasible ones.
    Independent of the LP solver: plain linear algebra.
    """
    k = d_a.shape[0]
    free = [i for i in range(k) if i != base_pos]
    q = len(free)
    if q == 0:
        return np.zeros((1, 1))
    rows, rhs = [], []
    for i, j in itertools.permutations(range(k), 2):
        row = np.zeros(q)
        if i != base_pos:
            row[free.index(i)] += 1.0
        if j != base_pos:
            row[free.index(j)] -= 1.0
        rows.append(row)
        rhs.append(d_a[i, j])
    rows = np.array(rows)
    rhs = np.array(rhs)
    vertices = []
    for combo in itertools.combinations(range(len(rows)), q):
        a = rows[list(combo)]
        b = rhs[list(combo)]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, b)
        if np.all(rows @ x <= rhs + 1e-9):
            vertices.append(x)
    if not vertices:
        vertices = [np.zeros(q)]
    uniq = {tuple(np.round(v, 9)) for v in vertices}
    out = np.zeros((len(uniq), k))
    for r, v in enumerate(sorted(uniq)):
        for pos, val in zip(free, v):
            out[r, pos] = val
    return out


def free_norm_by_vertices(weights: np.ndarray, d_a: np.ndarray, base_pos: int) -> float:
    """Brute-force free-space norm: maximize the pairing over all extreme
    Lipschitz profiles."""
    verts = lip_ball_vertices(d_a, base_pos)
    w = np.asarray(weights, dtype=float).copy()
    w[base_pos] = 0.0
    return float(np.abs(verts @ w).max())


def operator_norm_by_vertices(op, d_a: np.ndarray, d_t: np.ndarray) -> float:
    """Brute-force operator norm over all extreme profiles and point pairs."""
    verts = lip_ball_vertices(d_a, op.base_position)
    images = op.matrix @ verts.T                     # (n, n_vertices)
    n = op.space.n
    best = 0.0
    for x, y in itertools.combinations(range(n), 2):
        gaps = np.abs(images[x] - images[y])
        best = max(best, float(gaps.max()) / d_t[x, y])
    return best


@pytest.fixture
def three_line():
    # points at 0, 1, 3 on the line
    return line_space([0.0, 1.0, 3.0])


@pytest.fixture
def small_random_spaces():
    return [lf.random_metric_space(n, seed=100 + n) for n in (3, 4, 5, 6)]
