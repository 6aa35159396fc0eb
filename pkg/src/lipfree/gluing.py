"""Gluing a bounded extension operator near a low-dimensional core to the
identity far from it.

Starting from a space T with metric d, a distinguished subset K of declared
dimension dim K containing the base point, and an exhaustion C_1 subset C_2
subset ... of T minus K by distance thresholds, the pipeline:

  1. builds a net A inside K and a cover of K of order at most dim K,
  2. dilates the cover into T by the largest radius that preserves the order
     bound and keeps foreign net points out, giving a collar V around K,
  3. runs the extension-bundle construction on (V, d) to get an inner metric,
  4. extends the inner metric to all of T by LP with certified sup distortion,
  5. adds a scaled truncated copy of d, producing the glue metric, which
     detects proximity to K at a known scale.

For any probe metric e uniformly within eps/(480 (dim K + 1)) of the glue
metric, a cutoff rho built from e interpolates between the inner extension
operator (rebuilt for e) near K and the identity on C_m, and the glued
operator H(f) = (1 - rho) E(f on A) + rho f is certified to fix functions on
C_n and A and to have norm at most (150 dim K + 152)(Gamma + 1) with
Gamma = 88 (dim K + 1)(2 dim K + 3).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .certs import Certificate, make_certificate, all_passed
from .covers import (NetAndCover, brick_cover, build_net_cover,
                     order as family_order, verify_net_cover)
from .extension import (BundleError, ExtensionBundle, PerturbedBundle,
                        build_extension_bundle, build_perturbed_operator,
                        perturbed_norm_bound)
from .freenorm import (AdmissionError, LipFunction, WeightOperator,
                       lipschitz_constant, metric_extension_lp, operator_norm)
from .spaces import (DEFAULT_TOL, FiniteMetricSpace, as_indices,
                     dist_to_set_all, restrict_space, set_distance,
                     sup_distance, truncate, validate_metric)


class GluingError(RuntimeError):
    """The gluing pipeline could not be assembled from the given data."""


def inner_norm_bound(dim_k: int) -> float:
    """Norm bound of the inner extension operator: 88 (dimK+1)(2 dimK+3)."""
    return perturbed_norm_bound(dim_k)


def glued_norm_bound(dim_k: int) -> float:
    """Norm bound of the glued operator: (150 dimK + 152)(Gamma + 1)."""
    return (150.0 * dim_k + 152.0) * (inner_norm_bound(dim_k) + 1.0)


def probe_radius(eps: float, dim_k: int) -> float:
    """Admissible uniform distance of probe metrics from the glue metric."""
    return eps / (480.0 * (dim_k + 1))


@dataclass(frozen=True)
class GluingConfig:
    space: FiniteMetricSpace
    k: tuple[int, ...]
    dim_k: int
    thresholds: tuple[float, ...]

    def __post_init__(self):
        k = as_indices(self.k, self.space)
        object.__setattr__(self, "k", k)
        if not k:
            raise ValueError("core subset must be nonempty")
        if self.space.base_index not in k:
            raise ValueError("base point must belong to the core subset")
        if self.dim_k < 0:
            raise ValueError("dim_k must be nonnegative")
        ts = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        if not ts or any(t <= 0 for t in ts):
            raise ValueError("thresholds must be positive")
        if any(ts[i] <= ts[i + 1] for i in range(len(ts) - 1)):
            raise ValueError("thresholds must be strictly decreasing")


def build_exhaustion(cfg: GluingConfig) -> tuple[tuple[int, ...], ...]:
    """Increasing sets C_n = {x : d(x, K) >= t_n}, disjoint from K, whose
    union is all of T minus K; uncovered remainders are reported."""
    d = cfg.space.dist
    dk = dist_to_set_all(d, cfg.k)
    levels = tuple(tuple(int(i) for i in np.flatnonzero(dk >= t)) for t in cfg.thresholds)
    in_k = np.zeros(cfg.space.n, dtype=bool)
    in_k[list(cfg.k)] = True
    uncovered = np.flatnonzero(~in_k & (dk < cfg.thresholds[-1]))
    if uncovered.size:
        raise GluingError(
            f"threshold {cfg.thresholds[-1]} leaves point {int(uncovered[0])} "
            f"(distance {dk[uncovered[0]]:.6g} from the core) uncovered")
    return levels


_SANDWICH = {
    "reference": (1.0 / 32.0, 1.0 / 14.0),
    "probe": (1.0 / 30.0, 1.0 / 15.0),
}


def sandwich_sets(metric: np.ndarray, k, eps: float, dim_k: int,
                  variant: str = "reference") -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Sublevel sets of the distance to the core at the two calibrated scales.

    The lower set is closed (<=), the upper set open (<); "reference" uses the
    1/32 and 1/14 fractions of eps/(dimK+1), "probe" the 1/30 and 1/15 ones.
    """
    if variant not in _SANDWICH:
        raise ValueError(f"variant must be one of {sorted(_SANDWICH)}")
    lo_frac, hi_frac = _SANDWICH[variant]
    dk = dist_to_set_all(np.asarray(metric, dtype=float), as_indices(k))
    denom = dim_k + 1
    lo = tuple(int(i) for i in np.flatnonzero(dk <= lo_frac * eps / denom))
    hi = tuple(int(i) for i in np.flatnonzero(dk < hi_frac * eps / denom))
    return lo, hi


def cutoff(e: np.ndarray, w1, eps: float, dim_k: int) -> np.ndarray:
    """rho(x) = min(1, (30 (dimK+1)/eps) e(x, W1)); 1-Lipschitz up to scale."""
    w1 = as_indices(w1)
    if not w1:
        raise ValueError("cutoff needs a nonempty inner set")
    scale = 30.0 * (dim_k + 1) / eps
    return np.minimum(1.0, scale * dist_to_set_all(np.asarray(e, dtype=float), w1))


@dataclass(frozen=True)
class GluingBundle:
    cfg: GluingConfig
    n: int
    m: int
    eps: float
    eta: float
    dilation: float
    gamma: float
    net: tuple[int, ...]                  # net inside the core, T indices
    exhaustion: tuple[tuple[int, ...], ...]
    v_indices: tuple[int, ...]            # the collar V around the core
    v_sets: tuple[tuple[int, ...], ...]   # dilated cover of V, T indices
    v_space: FiniteMetricSpace
    v_bundle: ExtensionBundle
    extended: np.ndarray                  # inner metric extended to T by LP
    truncated: np.ndarray                 # min(d, eta)
    metric: np.ndarray                    # extended + eps * truncated / (14 eta (dimK+1))
    core_lo: tuple[int, ...]              # reference sandwich sets for `metric`
    core_hi: tuple[int, ...]
    certificates: tuple[Certificate, ...]

    @property
    def passed(self) -> bool:
        return all_passed(self.certificates)


def _dilate(d: np.ndarray, u_sets, net, eps: float, t: float):
    """Distance dilation of the core cover, clipped to the eps/2 net balls."""
    out = []
    for a, s in zip(net, u_sets):
        du = d[:, list(s)].min(axis=1)
        members = np.flatnonzero((du <= t) & (d[:, a] < eps / 2.0))
        out.append(tuple(int(i) for i in members))
    return out


def build_gluing_bundle(cfg: GluingConfig, n: int, eps: float,
                        refiner=brick_cover, tol: float = DEFAULT_TOL) -> GluingBundle:
    """Assemble the glue metric and its certificates for exhaustion level n."""
    space = cfg.space
    d = space.dist
    exhaustion = build_exhaustion(cfg)
    if not 1 <= n <= len(exhaustion):
        raise ValueError(f"n must index the exhaustion, got {n}")
    dk_cn = set_distance(d, cfg.k, exhaustion[n - 1])
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if eps > dk_cn:
        raise ValueError(f"eps must not exceed d(core, C_n) = {dk_cn:.6g}")

    k_space = restrict_space(space, cfg.k, base_point=space.base_index)
    if k_space.nominal_dim is not None and k_space.nominal_dim != cfg.dim_k:
        raise GluingError(
            f"declared dim_k={cfg.dim_k} but the core varies along "
            f"{k_space.nominal_dim} axes")
    knc = build_net_cover(k_space, eps, refiner=refiner)
    k_list = list(cfg.k)
    net = tuple(k_list[i] for i in knc.net)
    u_sets = tuple(tuple(k_list[i] for i in s) for s in knc.sets)

    # largest dilation radius keeping the order bound and net exclusivity
    du_all = np.concatenate([d[:, list(s)].min(axis=1) for s in u_sets])
    candidates = sorted(set(float(v) for v in du_all), reverse=True)
    chosen_t, v_sets = None, None
    for t in candidates:
        cand = _dilate(d, u_sets, net, eps, t)
        if family_order(cand) > cfg.dim_k:
            continue
        if any(net[j] in set(s) for i, s in enumerate(cand)
               for j in range(len(net)) if j != i):
            continue
        chosen_t, v_sets = t, cand
        break
    if chosen_t is None:
        raise GluingError("no dilation radius preserves the order bound")

    covered = sorted(set(itertools.chain.from_iterable(v_sets)))
    dk = dist_to_set_all(d, cfg.k)
    outside = [i for i in range(space.n) if i not in set(covered)]
    cut = min((float(dk[i]) for i in outside), default=float("inf"))
    cut = min(cut, eps / 2.0)
    attained = sorted(set(float(v) for v in dk if 0.0 < v < cut), reverse=True)
    if attained:
        eta = attained[0]
    elif np.isfinite(cut) and cut > 0:
        eta = cut / 2.0
    else:
        eta = eps / 4.0
    v_indices = tuple(int(i) for i in np.flatnonzero(dk <= eta))

    v_list = list(v_indices)
    pos_in_v = {p: i for i, p in enumerate(v_list)}
    v_space = restrict_space(space, v_indices, base_point=space.base_index)
    nc_v = NetAndCover(
        v_space,
        tuple(pos_in_v[a] for a in net),
        tuple(tuple(sorted(pos_in_v[x] for x in s if x in pos_in_v)) for s in v_sets),
        float(eps),
        int(cfg.dim_k),
    )
    nc_cert = verify_net_cover(nc_v)
    if not nc_cert.passed:
        raise GluingError(f"collar cover failed verification: {nc_cert}")
    v_bundle = build_extension_bundle(v_space, eps, nc_v, tol=tol)

    ext = metric_extension_lp(d, v_indices, v_bundle.adapted, backend="auto")
    extended = ext.matrix
    truncated = truncate(d, eta)
    scale = eps / (14.0 * eta * (cfg.dim_k + 1))
    glue = extended + scale * truncated
    report = validate_metric(glue, tol=tol)
    if not report.ok:
        raise GluingError(f"glue metric invalid: {report.summary()}")

    inputs = {"space": space.key, "n": n, "eps": eps, "dim_k": cfg.dim_k}
    certs = [nc_cert, ext.certificate]
    certs.append(make_certificate(
        "glue-extension-sup", 4.0 * eps, sup_distance(extended, d), "lt", tol,
        inputs=inputs))
    certs.append(make_certificate(
        "glue-truncation-scale", eps / (14.0 * (cfg.dim_k + 1)),
        sup_distance(glue, extended), "le", tol, inputs=inputs))
    certs.append(make_certificate(
        "glue-sup-distance", 5.0 * eps, sup_distance(glue, d), "lt", tol,
        inputs=inputs))

    core_lo, core_hi = sandwich_sets(glue, cfg.k, eps, cfg.dim_k, "reference")
    lo_set = set(core_lo)
    m_found = None
    for m in range(n, len(exhaustion) + 1):
        if set(exhaustion[m - 1]) | lo_set == set(range(space.n)):
            m_found = m
            break
    if m_found is None:
        raise GluingError("no exhaustion level joins the inner sandwich set to cover T")

    bundle = GluingBundle(
        cfg=cfg, n=int(n), m=int(m_found), eps=float(eps), eta=float(eta),
        dilation=float(chosen_t), gamma=inner_norm_bound(cfg.dim_k),
        net=net, exhaustion=exhaustion, v_indices=v_indices,
        v_sets=tuple(tuple(s) for s in v_sets), v_space=v_space,
        v_bundle=v_bundle, extended=extended, truncated=truncated,
        metric=glue, core_lo=core_lo, core_hi=core_hi,
        certificates=tuple(certs),
    )
    failed = [c for c in certs if not c.passed]
    if failed:
        raise GluingError(f"bundle certificate failed: {failed[0]}")
    return bundle


def glue_domain(bundle: GluingBundle) -> tuple[int, ...]:
    """Domain of the glued operator: C_m together with the net."""
    cm = set(bundle.exhaustion[bundle.m - 1])
    return tuple(sorted(cm | set(bundle.net)))


def build_h_operator(bundle: GluingBundle, e: np.ndarray, inner: PerturbedBundle,
                     rho: np.ndarray) -> WeightOperator:
    """Glued operator rows: (1 - rho(x)) inner-weights + rho(x) identity.

    Requires the cutoff supports to be exact: rho saturates to 1 outside the
    collar and vanishes outside C_m, otherwise rows are undefined.
    """
    space = bundle.cfg.space
    dom = glue_domain(bundle)
    pos_in_dom = {p: i for i, p in enumerate(dom)}
    cm = set(bundle.exhaustion[bundle.m - 1])
    v_set = set(bundle.v_indices)
    pos_in_v = {p: i for i, p in enumerate(bundle.v_indices)}
    a_pos = [pos_in_dom[a] for a in bundle.net]
    rows = np.zeros((space.n, len(dom)))
    for x in range(space.n):
        w = 1.0 - rho[x]
        if w > 0.0:
            if x not in v_set:
                raise GluingError(f"cutoff not saturated at point {x} outside the collar")
            rows[x, a_pos] += w * inner.pou.matrix[pos_in_v[x]]
        if rho[x] > 0.0:
            if x not in cm:
                raise GluingError(f"cutoff positive at point {x} outside C_m")
            rows[x, pos_in_dom[x]] += rho[x]
    return WeightOperator(space, dom, rows, partition=True)


def build_h(bundle: GluingBundle, e: np.ndarray, inner: PerturbedBundle,
            f_dom_values):
    """Apply the glued operator to values given on C_m union the net.

    Rejects probe metrics outside the admission radius.
    """
    radius = probe_radius(bundle.eps, bundle.cfg.dim_k)
    measured = sup_distance(e, bundle.metric)
    if not measured < radius:
        raise AdmissionError(measured, radius)
    w1, _ = sandwich_sets(e, bundle.cfg.k, bundle.eps, bundle.cfg.dim_k, "probe")
    rho = cutoff(e, w1, bundle.eps, bundle.cfg.dim_k)
    op = build_h_operator(bundle, e, inner, rho)
    return LipFunction(bundle.cfg.space, op.apply(np.asarray(f_dom_values, dtype=float)))


def _mcshane_values(e_dom: np.ndarray, seed_pos, seed_vals: np.ndarray, lip: float) -> np.ndarray:
    g = (seed_vals[None, :] + lip * e_dom[:, seed_pos]).min(axis=1)
    g[list(seed_pos)] = seed_vals
    return g


@dataclass(frozen=True)
class GluingCertificate:
    n: int
    m: int
    eps: float
    dim_k: int
    net: tuple[int, ...]
    domain: tuple[int, ...]
    probe: np.ndarray
    h_matrix: np.ndarray | None
    measured_norm: float
    bound: float
    certificates: tuple[Certificate, ...]

    @property
    def passed(self) -> bool:
        return all_passed(self.certificates)


def gluing_certificate_to_json(cert: GluingCertificate) -> dict:
    from .certs import certificate_to_json

    return {
        "n": cert.n,
        "m": cert.m,
        "eps": cert.eps,
        "dim_k": cert.dim_k,
        "net": list(cert.net),
        "domain": list(cert.domain),
        "probe_metric": [list(map(float, row)) for row in cert.probe],
        "operator": None if cert.h_matrix is None else
                    [list(map(float, row)) for row in cert.h_matrix],
        "measured_norm": cert.measured_norm,
        "bound": cert.bound,
        "passed": cert.passed,
        "certificates": [certificate_to_json(c) for c in cert.certificates],
    }


def certify_gluing(bundle: GluingBundle, e: np.ndarray, rng=None,
                   family_size: int = 6, tol: float = DEFAULT_TOL) -> GluingCertificate:
    """Certify the glued operator for one probe metric.

    Never raises on a failed bound; the returned certificate carries every
    failed clause.  The checks: admission radius, sandwich inclusion chain,
    cutoff supports and Lipschitz estimate, exact restriction identity, the
    operator norm against (150 dimK + 152)(Gamma + 1), and a random spanning
    family driven through the operator as a guard on the identity part.
    """
    space = bundle.cfg.space
    e = np.asarray(e, dtype=float)
    eps, dim_k = bundle.eps, bundle.cfg.dim_k
    bound = glued_norm_bound(dim_k)
    inputs = {"space": space.key, "n": bundle.n, "m": bundle.m, "eps": eps}
    certs: list[Certificate] = []

    def finish(h_matrix=None, measured=float("inf")):
        return GluingCertificate(
            n=bundle.n, m=bundle.m, eps=eps, dim_k=dim_k, net=bundle.net,
            domain=glue_domain(bundle), probe=e, h_matrix=h_matrix,
            measured_norm=measured, bound=bound, certificates=tuple(certs),
        )

    radius = probe_radius(eps, dim_k)
    measured_dist = sup_distance(e, bundle.metric)
    certs.append(make_certificate(
        "probe-admission", radius, measured_dist, "lt", 0.0, inputs=inputs))
    if not certs[-1].passed:
        return finish()

    w1, w2 = sandwich_sets(e, bundle.cfg.k, eps, dim_k, "probe")
    v1, v2 = set(bundle.core_lo), set(bundle.core_hi)
    chain = [
        ("inclusion-lo-probe", v1, set(w1)),
        ("inclusion-probe-pair", set(w1), set(w2)),
        ("inclusion-probe-hi", set(w2), v2),
        ("inclusion-hi-collar", v2, set(bundle.v_indices)),
    ]
    for kind, small, big in chain:
        missing = sorted(small - big)
        certs.append(make_certificate(
            kind, 0.0, float(len(missing)), "le", 0.0,
            witnesses=missing[:4], inputs=inputs))
    if not all(c.passed for c in certs):
        return finish()

    v_list = list(bundle.v_indices)
    try:
        inner = build_perturbed_operator(
            bundle.v_bundle, e[np.ix_(v_list, v_list)], tol=tol)
    except (AdmissionError, BundleError) as err:
        certs.append(make_certificate(
            "inner-operator", 0.0, 1.0, "le", 0.0,
            details={"error": str(err)}, inputs=inputs))
        return finish()
    certs.extend(inner.certificates)

    rho = cutoff(e, w1, eps, dim_k)
    cm = list(bundle.exhaustion[bundle.m - 1])
    cn = list(bundle.exhaustion[bundle.n - 1])
    not_cm = sorted(set(range(space.n)) - set(cm))
    not_v = sorted(set(range(space.n)) - set(bundle.v_indices))
    certs.append(make_certificate(
        "cutoff-vanishes-inside", 0.0,
        float(np.max(rho[list(w1)], initial=0.0)), "le", 0.0, inputs=inputs))
    certs.append(make_certificate(
        "cutoff-vanishes-off-cm", 0.0,
        float(np.max(rho[not_cm], initial=0.0)), "le", 0.0, inputs=inputs))
    certs.append(make_certificate(
        "cutoff-saturates-outside-collar", 1.0,
        float(np.min(rho[not_v], initial=1.0)), "ge", 0.0, inputs=inputs))
    certs.append(make_certificate(
        "cutoff-saturates-on-cn", 1.0,
        float(np.min(rho[cn], initial=1.0)), "ge", 0.0, inputs=inputs))
    certs.append(make_certificate(
        "cutoff-lipschitz", 30.0 * (dim_k + 1) / eps,
        lipschitz_constant(rho, e), "le", tol, inputs=inputs))
    if not all(c.passed for c in certs):
        return finish()

    h_op = build_h_operator(bundle, e, inner, rho)
    dom = list(h_op.domain)
    pos_in_dom = {p: i for i, p in enumerate(dom)}
    fixed = sorted(set(cn) | set(bundle.net))
    eye_rows = np.zeros((len(fixed), len(dom)))
    for r, x in enumerate(fixed):
        eye_rows[r, pos_in_dom[x]] = 1.0
    identity_gap = float(np.abs(h_op.matrix[fixed] - eye_rows).max()) if fixed else 0.0
    certs.append(make_certificate(
        "restriction-identity", 0.0, identity_gap, "le", 0.0, inputs=inputs))

    e_dom = e[np.ix_(dom, dom)]
    norm, wit = operator_norm(h_op, e_dom, e, with_witness=True)
    certs.append(make_certificate(
        "glued-operator-norm", bound, norm, "le", tol,
        witnesses=[wit], details={"headroom": bound - norm}, inputs=inputs))

    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng or 0)
    base_pos = pos_in_dom[space.base_index]
    family_gap = 0.0
    family_lip = 0.0
    base_gap = 0.0
    for _ in range(family_size):
        size = max(2, int(gen.integers(2, max(3, len(dom) // 2 + 1))))
        seed_pos = sorted(gen.choice(len(dom), size=min(size, len(dom)), replace=False))
        seed_vals = gen.choice([-1.0, 1.0], size=len(seed_pos))
        lip = lipschitz_constant(seed_vals, e_dom[np.ix_(seed_pos, seed_pos)])
        if not np.isfinite(lip) or lip == 0.0:
            continue
        f = _mcshane_values(e_dom, seed_pos, seed_vals, lip)
        f = (f - f[base_pos]) / lip
        hf = h_op.apply(f)
        family_lip = max(family_lip, lipschitz_constant(hf, e))
        family_gap = max(family_gap, float(np.abs(hf[fixed] - f[[pos_in_dom[x] for x in fixed]]).max()))
        base_gap = max(base_gap, abs(float(hf[space.base_index])))
    certs.append(make_certificate(
        "family-restriction-identity", 0.0, family_gap, "le", 0.0, inputs=inputs))
    certs.append(make_certificate(
        "family-lipschitz", norm, family_lip, "le", max(tol, 1e-9) * (1 + norm),
        details={"bound": bound}, inputs=inputs))
    certs.append(make_certificate(
        "glued-vanishes-at-base", 0.0, base_gap, "le", 0.0,
        details={"dual_operator": "finite rank, automatic"}, inputs=inputs))

    return finish(h_matrix=h_op.matrix, measured=float(norm))
