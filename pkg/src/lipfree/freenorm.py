"""Lipschitz constants, free-space norms, extension operators, metric extension.

The norm of a finitely supported functional mu = sum_i w_i delta_{x_i} over a
finite metric space is computed in the dual formulation:

    max  sum_i w_i f(x_i)
    s.t. f(base) = 0 and |f(x) - f(y)| <= d(x, y) for all pairs,

a finite LP whose value equals the norm by LP duality.  The norm only depends
on the metric restricted to the support plus the base point, so by default the
LP is solved on that subspace; the equivalence with the full LP is covered by
the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp as lpmod
from .certs import Certificate, make_certificate
from .spaces import (DEFAULT_TOL, FiniteMetricSpace, as_indices,
                     require_metric, sup_distance, validate_metric)


class AdmissionError(ValueError):
    """A perturbed metric lies outside the admissible radius."""

    def __init__(self, measured, radius):
        super().__init__(f"perturbation {measured:.6g} exceeds admissible radius {radius:.6g}")
        self.measured = measured
        self.radius = radius


class MetricExtensionError(RuntimeError):
    """The extension LP exceeded its certified distortion bound."""

    def __init__(self, certificate):
        super().__init__(str(certificate))
        self.certificate = certificate


@dataclass(frozen=True)
class FreeElement:
    """Finitely supported signed weight vector; the base weight is normalized
    to make the total mass zero, which leaves all evaluations unchanged."""

    space: FiniteMetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.space.n,):
            raise ValueError("weights must give one entry per point")
        b = self.space.base_index
        w[b] = 0.0
        w[b] = -w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_deltas(cls, space: FiniteMetricSpace, deltas: dict) -> "FreeElement":
        w = np.zeros(space.n)
        for point, weight in deltas.items():
            idx = point if isinstance(point, int) else space.index(point)
            w[idx] += weight
        return cls(space, w)

    @property
    def support(self) -> tuple[int, ...]:
        b = self.space.base_index
        return tuple(int(i) for i in np.flatnonzero(self.weights) if i != b)

    def evaluate(self, values: np.ndarray) -> float:
        """Pairing with a function that vanishes at the base point."""
        return float(self.weights @ np.asarray(values, dtype=float))


@dataclass(frozen=True)
class LipFunction:
    space: FiniteMetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise ValueError("values must give one entry per point")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def vanishes_at_base(self) -> bool:
        return self.values[self.space.base_index] == 0.0


def lipschitz_constant(values, d: np.ndarray) -> float:
    """Best Lipschitz constant of values w.r.t. d; inf when a zero-distance
    pair carries different values (pseudometrics only)."""
    f = values.values if isinstance(values, LipFunction) else np.asarray(values, dtype=float)
    d = np.asarray(d, dtype=float)
    df = np.abs(f[:, None] - f[None, :])
    pos = d > 0.0
    best = float((df[pos] / d[pos]).max()) if pos.any() else 0.0
    degenerate = (~pos) & (df > 0.0)
    np.fill_diagonal(degenerate, False)
    if degenerate.any():
        return float("inf")
    return best


# ---------------------------------------------------------------------------
# free-space norm


def _dual_norm(weights: np.ndarray, d_sub: np.ndarray, tol: float = lpmod.SOLVER_TOL) -> float:
    """LP value for weights over points 0..q-1 with the base at index q.

    d_sub is the (q+1) x (q+1) metric on support + base, base last.
    """
    q = len(weights)
    if q == 0:
        return 0.0
    rows, rhs = [], []
    for i in range(q):
        for j in range(q):
            if i == j:
                continue
            row = np.zeros(q)
            row[i] = 1.0
            row[j] = -1.0
            rows.append(row)
            rhs.append(d_sub[i, j])
    for i in range(q):
        row = np.zeros(q)
        row[i] = 1.0
        rows.append(row.copy())
        rhs.append(d_sub[i, q])
        rows.append(-row)
        rhs.append(d_sub[q, i])
    prog = lpmod.LinearProgram(
        objective=np.asarray(weights, dtype=float),
        sense="max",
        rows=np.array(rows),
        relations=tuple("<=" for _ in rows),
        rhs=np.array(rhs),
    )
    sol = lpmod.solve(prog, tol=tol)
    if sol.status != "optimal":
        raise lpmod.LpError(f"norm LP ended with status {sol.status}")
    return max(sol.value, 0.0)


def _norm_of_weights(c: np.ndarray, d: np.ndarray, base: int,
                     shortcuts: bool = True) -> float:
    """Norm of the weight vector c over the points of d with the given base.

    The base-point weight never matters and is ignored.  With shortcuts
    enabled, single-point elements and exact two-point molecules are answered
    from the norm identities ||w delta_x|| = |w| d(x, base) and
    ||delta_x - delta_y|| = d(x, y); everything else goes through the LP.
    """
    nz = [int(i) for i in np.flatnonzero(c) if i != base]
    if not nz:
        return 0.0
    if shortcuts:
        if len(nz) == 1:
            return abs(float(c[nz[0]])) * float(d[nz[0], base])
        if len(nz) == 2:
            a, b = nz
            if (c[a] == 1.0 and c[b] == -1.0) or (c[a] == -1.0 and c[b] == 1.0):
                return float(d[a, b])
    sub = nz + [base]
    d_sub = d[np.ix_(sub, sub)]
    return _dual_norm(np.asarray(c, dtype=float)[nz], d_sub)


def free_space_norm(mu: FreeElement, dist: np.ndarray | None = None,
                    restrict_support: bool = True) -> float:
    """Norm of mu in the free space over (points of mu, dist)."""
    d = np.asarray(dist if dist is not None else mu.space.dist, dtype=float)
    base = mu.space.base_index
    if restrict_support:
        return _norm_of_weights(mu.weights, d, base, shortcuts=False)
    others = [i for i in range(mu.space.n) if i != base]
    sub = others + [base]
    d_sub = d[np.ix_(sub, sub)]
    return _dual_norm(mu.weights[others], d_sub)


# ---------------------------------------------------------------------------
# McShane extension


def mcshane_extend(space: FiniteMetricSpace, members, f_values, lip_bound: float,
                   dist: np.ndarray | None = None) -> LipFunction:
    """Extend f from a subset with constant at most lip_bound:
    g(x) = min_a f(a) + L d(x, a).  Restricts back to f exactly."""
    d = np.asarray(dist if dist is not None else space.dist, dtype=float)
    idx = list(as_indices(members, space))
    f = np.asarray(f_values, dtype=float)
    if f.shape != (len(idx),):
        raise ValueError("need one value per subset point")
    d_a = d[np.ix_(idx, idx)]
    actual = lipschitz_constant(f, d_a)
    if actual > lip_bound * (1 + 1e-12) + 1e-12:
        raise ValueError(f"function has Lipschitz constant {actual:.6g} > bound {lip_bound:.6g}")
    g = (f[None, :] + lip_bound * d[:, idx]).min(axis=1)
    g[idx] = f
    return LipFunction(space, g)


# ---------------------------------------------------------------------------
# weight operators


@dataclass(frozen=True)
class WeightOperator:
    """Linear map from functions on a subset A to functions on all points,
    f -> sum_i f(a_i) w_i.  Partition-type operators have nonnegative rows
    summing to one."""

    space: FiniteMetricSpace
    domain: tuple[int, ...]
    matrix: np.ndarray
    partition: bool = False

    def __post_init__(self):
        dom = tuple(int(i) for i in self.domain)
        object.__setattr__(self, "domain", dom)
        w = np.array(self.matrix, dtype=float)
        if w.shape != (self.space.n, len(dom)):
            raise ValueError(f"weight matrix must be {self.space.n} x {len(dom)}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.partition:
            if w.min() < -1e-12:
                raise ValueError("partition weights must be nonnegative")
            sums = w.sum(axis=1)
            if np.abs(sums - 1.0).max() > 1e-9:
                raise ValueError("partition weights must sum to one at every point")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)

    @property
    def base_position(self) -> int:
        b = self.space.base_index
        if b not in self.domain:
            raise ValueError("base point missing from the operator domain")
        return self.domain.index(b)

    def apply(self, f_values) -> np.ndarray:
        f = np.asarray(f_values, dtype=float)
        if f.shape != (len(self.domain),):
            raise ValueError("need one value per domain point")
        return self.matrix @ f

    def restricts_to_identity(self) -> bool:
        """True iff rows at domain points are exact indicator vectors."""
        eye = np.eye(len(self.domain))
        return bool(np.array_equal(self.matrix[list(self.domain)], eye))


def identity_operator(space: FiniteMetricSpace) -> WeightOperator:
    return WeightOperator(space, tuple(range(space.n)), np.eye(space.n), partition=True)


def apply_weight_operator(op: WeightOperator, f_values) -> LipFunction:
    return LipFunction(op.space, op.apply(f_values))


def molecule_norm_matrix(op: WeightOperator, d_a: np.ndarray,
                         pairs=None, shortcuts: bool = True) -> np.ndarray:
    """Matrix of free-space norms of the row differences of op over (A, d_a).

    Entry (x, y) is the norm of sum_i (w_i(x) - w_i(y)) delta_{a_i}, the exact
    sup over the unit ball of functions on A of |op(f)(x) - op(f)(y)|.
    """
    d_a = np.asarray(d_a, dtype=float)
    k = len(op.domain)
    if d_a.shape != (k, k):
        raise ValueError("metric on A must match the operator domain")
    base = op.base_position
    n = op.space.n
    w = op.matrix
    out = np.zeros((n, n))
    it = pairs if pairs is not None else itertools.combinations(range(n), 2)
    for x, y in it:
        c = w[x] - w[y]
        val = _norm_of_weights(c, d_a, base, shortcuts=shortcuts)
        out[x, y] = out[y, x] = val
    return out


def operator_norm(op: WeightOperator, d_a: np.ndarray, d_t: np.ndarray,
                  molecule_norms: np.ndarray | None = None,
                  with_witness: bool = False):
    """Norm of op from Lip0(A, d_a) to Lip0(T, d_t) via the molecule reduction:
    max over pairs x != y of ||row(x) - row(y)||_{F(A)} / d_t(x, y)."""
    d_t = np.asarray(d_t, dtype=float)
    norms = molecule_norms if molecule_norms is not None else molecule_norm_matrix(op, d_a)
    n = op.space.n
    if n < 2:
        return (0.0, (0, 0)) if with_witness else 0.0
    iu = np.triu_indices(n, k=1)
    ratios = norms[iu] / d_t[iu]
    best = int(np.argmax(ratios))
    value = float(ratios[best])
    if with_witness:
        return value, (int(iu[0][best]), int(iu[1][best]))
    return value


# ---------------------------------------------------------------------------
# JSON forms


def free_element_to_json(mu: FreeElement) -> dict:
    return {"weights": {mu.space.points[i]: float(mu.weights[i])
                        for i in np.flatnonzero(mu.weights)}}


def free_element_from_json(space: FiniteMetricSpace, obj: dict) -> FreeElement:
    return FreeElement.from_deltas(space, dict(obj["weights"]))


def lip_function_to_json(f: LipFunction) -> dict:
    return {"values": {f.space.points[i]: float(v) for i, v in enumerate(f.values)}}


def lip_function_from_json(space: FiniteMetricSpace, obj: dict) -> LipFunction:
    values = np.zeros(space.n)
    for name, v in obj["values"].items():
        values[space.index(name)] = v
    return LipFunction(space, values)


def weight_operator_to_json(op: WeightOperator) -> dict:
    return {
        "domain": list(op.domain),
        "matrix": [list(map(float, row)) for row in op.matrix],
        "partition": op.partition,
    }


def weight_operator_from_json(space: FiniteMetricSpace, obj: dict) -> WeightOperator:
    return WeightOperator(space, tuple(obj["domain"]),
                          np.array(obj["matrix"], dtype=float),
                          partition=bool(obj.get("partition", False)))


# ---------------------------------------------------------------------------
# metric extension with certified sup distortion


@dataclass(frozen=True)
class MetricExtension:
    matrix: np.ndarray
    distortion: float
    certificate: Certificate


def metric_extension_lp(d: np.ndarray, members, rho: np.ndarray,
                        tol: float = lpmod.SOLVER_TOL,
                        backend: str = "auto") -> MetricExtension:
    """Extend the metric rho from a subset S to all points of (T, d).

    Solves: minimize t subject to every triangle inequality on T, the values
    on S x S fixed to rho, |d2 - d| <= t on the remaining pairs, and a small
    positive floor on distinct pairs.  The optimum is certified against the
    interpolation bound sup |rho - d restricted to S x S|; exceeding it raises
    MetricExtensionError.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    s_idx = list(as_indices(members))
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (len(s_idx), len(s_idx)):
        raise ValueError("rho must be a matrix over the subset")
    require_metric(rho, what="subset metric rho")

    in_s = np.zeros(n, dtype=bool)
    in_s[s_idx] = True
    pos_in_s = {p: i for i, p in enumerate(s_idx)}
    positive = d[d > 0]
    floor = 1e-9 * float(positive.min()) if positive.size else 1e-12

    pair_id = -np.ones((n, n), dtype=int)
    ground = []
    nv = 0
    for i in range(n):
        for j in range(i + 1, n):
            if in_s[i] and in_s[j]:
                continue
            pair_id[i, j] = pair_id[j, i] = nv
            ground.append(d[i, j])
            nv += 1
    known = np.zeros((n, n))
    for i in s_idx:
        for j in s_idx:
            known[i, j] = rho[pos_in_s[i], pos_in_s[j]]

    # Any optimum beyond the interpolation bound is treated as failure, so the
    # search may be restricted to t <= cap up front.  Within that region every
    # free pair lies in [d - cap, d + cap], which prunes triangle rows that
    # can never go tight; the reduced LP is exactly equivalent there.
    cap = sup_distance(rho, d[np.ix_(s_idx, s_idx)]) if s_idx else 0.0
    lo_val = np.where(pair_id >= 0, np.maximum(floor, d - cap), known)
    hi_val = np.where(pair_id >= 0, d + cap, known)

    t_col = nv
    rows_parts, cols_parts, data_parts, rhs_parts = [], [], [], []
    row_count = 0

    # one row per triple and target pair: x(t) - x(leg1) - x(leg2) <= 0,
    # with entries fixed on S x S moved to the right-hand side
    tri = np.array(list(itertools.combinations(range(n), 3)), dtype=int)
    patterns = (((0, 1), (0, 2), (2, 1)), ((0, 2), (0, 1), (1, 2)), ((1, 2), (1, 0), (0, 2)))
    if tri.size:
        for target, leg1, leg2 in patterns:
            slots = []
            for (a, b), sign in ((target, 1.0), (leg1, -1.0), (leg2, -1.0)):
                pid = pair_id[tri[:, a], tri[:, b]]
                kv = known[tri[:, a], tri[:, b]]
                slots.append((pid, kv, sign))
            keep = (slots[0][0] >= 0) | (slots[1][0] >= 0) | (slots[2][0] >= 0)
            worst = (hi_val[tri[:, target[0]], tri[:, target[1]]]
                     - lo_val[tri[:, leg1[0]], tri[:, leg1[1]]]
                     - lo_val[tri[:, leg2[0]], tri[:, leg2[1]]])
            keep &= worst > 0.0
            nkeep = int(keep.sum())
            if nkeep == 0:
                continue
            ridx = np.arange(row_count, row_count + nkeep)
            rhs_block = np.zeros(nkeep)
            for pid, kv, sign in slots:
                pid_k, kv_k = pid[keep], kv[keep]
                var = pid_k >= 0
                rows_parts.append(ridx[var])
                cols_parts.append(pid_k[var])
                data_parts.append(np.full(int(var.sum()), sign))
                rhs_block[~var] -= sign * kv_k[~var]
            rhs_parts.append(rhs_block)
            row_count += nkeep

    # |x_p - d_p| <= t for every free pair
    if nv:
        g = np.asarray(ground)
        pids = np.arange(nv)
        ridx = np.arange(row_count, row_count + nv)
        rows_parts += [ridx, ridx]
        cols_parts += [pids, np.full(nv, t_col)]
        data_parts += [np.ones(nv), -np.ones(nv)]
        rhs_parts.append(g)
        row_count += nv
        ridx = np.arange(row_count, row_count + nv)
        rows_parts += [ridx, ridx]
        cols_parts += [pids, np.full(nv, t_col)]
        data_parts += [-np.ones(nv), -np.ones(nv)]
        rhs_parts.append(-g)
        row_count += nv

    rows_i = np.concatenate(rows_parts) if rows_parts else np.zeros(0, dtype=int)
    cols_i = np.concatenate(cols_parts) if cols_parts else np.zeros(0, dtype=int)
    data = np.concatenate(data_parts) if data_parts else np.zeros(0)
    rhs = np.concatenate(rhs_parts) if rhs_parts else np.zeros(0)

    c = np.zeros(nv + 1)
    c[t_col] = 1.0
    bounds = [(max(floor, g - cap), g + cap) for g in ground] + [(0.0, cap)]
    use_sparse = backend == "scipy" or (backend == "auto" and row_count * (nv + 1) > 2_000_000)
    if use_sparse:
        from scipy.sparse import coo_matrix

        a_ub = coo_matrix((data, (rows_i, cols_i)), shape=(row_count, nv + 1)).tocsr()
        sol = lpmod.solve_min_sparse(c, a_ub, rhs, bounds)
    else:
        rows = np.zeros((row_count, nv + 1))
        rows[rows_i, cols_i] = data
        prog = lpmod.LinearProgram(
            objective=c, sense="min", rows=rows,
            relations=tuple("<=" for _ in range(row_count)),
            rhs=rhs, bounds=tuple(bounds),
        )
        sol = lpmod.solve(prog, tol=tol)
    if sol.status == "infeasible":
        # the capped region is empty only when every extension must exceed the
        # interpolation bound, which the construction rules out
        raise MetricExtensionError(make_certificate(
            "metric-extension-distortion", cap, float("inf"), "le", max(tol, 1e-9),
            details={"status": "infeasible within the certified cap"}))
    if sol.status != "optimal":
        raise lpmod.LpError(f"metric extension LP ended with status {sol.status}")

    d2 = known.copy()
    for i in range(n):
        for j in range(i + 1, n):
            pid = pair_id[i, j]
            if pid >= 0:
                d2[i, j] = d2[j, i] = sol.assignment[pid]
    np.fill_diagonal(d2, 0.0)

    claimed = sup_distance(rho, d[np.ix_(s_idx, s_idx)]) if s_idx else 0.0
    off = ~in_s[:, None] | ~in_s[None, :]
    measured = float(np.abs((d2 - d)[off]).max()) if off.any() else 0.0
    cert = make_certificate(
        "metric-extension-distortion", claimed, measured, "le", max(tol, 1e-9),
        witnesses=[], inputs={"n": n, "subset": s_idx},
        details={"floor": floor, "lp_optimum": float(sol.value),
                 "metric_check": validate_metric(d2, tol=DEFAULT_TOL).summary()},
    )
    if not cert.passed:
        raise MetricExtensionError(cert)
    return MetricExtension(d2, measured, cert)
