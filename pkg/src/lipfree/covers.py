"""Set families, order-bounded brick covers of grids, and separated nets.

build_net_cover turns any fine cover (diameter below eps/6, order at most r)
into a separated net A and a merged cover (U_i) with:

  (i)   a_i belongs to U_j exactly when i = j,
  (ii)  U_i is contained in the open ball of radius eps/2 around a_i,
  (iii) distinct net points are more than eps/3 apart,

and the merged family never has larger order than the input family.  All the
choices the construction leaves open (representatives, the separated
subfamily, the assignment of leftover sets) are made greedily by first index,
so the output is a deterministic function of the input.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .certs import Certificate, make_certificate
from .spaces import FiniteMetricSpace, diameter


class CoverError(ValueError):
    """A family fails the preconditions of the net construction."""


@dataclass(frozen=True)
class CoverFamily:
    space: FiniteMetricSpace
    sets: tuple[tuple[int, ...], ...]
    nominal_order_bound: int

    def __post_init__(self):
        sets = tuple(tuple(sorted(set(int(i) for i in s))) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        for s in sets:
            if s and (s[0] < 0 or s[-1] >= self.space.n):
                raise ValueError("set members out of range")

    def covers(self) -> bool:
        seen = set()
        for s in self.sets:
            seen.update(s)
        return len(seen) == self.space.n


def order(sets) -> int:
    """Largest n such that n+1 members share a point; -1 for all-empty input."""
    if isinstance(sets, CoverFamily):
        sets = sets.sets
    counts: dict[int, int] = {}
    for s in sets:
        for p in s:
            counts[p] = counts.get(p, 0) + 1
    if not counts:
        return -1
    return max(counts.values()) - 1


# ---------------------------------------------------------------------------
# brick covers of lattice-backed spaces


def _axis_windows(lo: int, hi: int, m: int, offset: int = 0, shared: bool = True):
    """Closed coordinate windows [s, s+m-1] covering lo..hi.

    Shared windows advance by m-1 so consecutive windows meet in one slot;
    unshared windows advance by m and partition the range.
    """
    if m == 1:
        return [(v, v) for v in range(lo, hi + 1)]
    step = (m - 1) if shared else m
    start = lo - (offset % step if step else 0)
    out = []
    s = start
    while s <= hi:
        out.append((s, s + m - 1))
        s += step
    return out


def _build_bricks(coords: np.ndarray, active: list[int], m: int) -> list[tuple[int, ...]]:
    """Staggered brick pattern with multiplicity at most 3 on the lattice points.

    The first two active axes form a running-bond pattern (windows share
    endpoints, odd rows shifted by half a brick); remaining axes are sliced
    into disjoint windows.  A point then lies in at most 2 x 2 bricks minus
    the staggered corner, so the order is at most min(#active axes, 3).
    """
    npts = coords.shape[0]
    if not active or m < 1:
        return [tuple(range(npts))]
    ranges = {a: (int(coords[:, a].min()), int(coords[:, a].max())) for a in active}
    shift = max((m - 1) // 2, 1)

    first = active[0]
    rest = active[1:]
    bricks = []
    slab_axes = []
    slab_windows = []
    for pos, a in enumerate(rest):
        lo, hi = ranges[a]
        shared = pos == 0 and m >= 3            # only the second axis staggers
        slab_axes.append(a)
        slab_windows.append(list(enumerate(_axis_windows(lo, hi, m, shared=shared))))
    lo1, hi1 = ranges[first]

    for combo in itertools.product(*slab_windows) if slab_windows else [()]:
        parity = combo[0][0] % 2 if combo and m >= 3 else 0
        mask = np.ones(npts, dtype=bool)
        for (idx, (wlo, whi)), a in zip(combo, slab_axes):
            mask &= (coords[:, a] >= wlo) & (coords[:, a] <= whi)
        for wlo, whi in _axis_windows(lo1, hi1, m, offset=parity * shift, shared=True):
            sub = mask & (coords[:, first] >= wlo) & (coords[:, first] <= whi)
            if sub.any():
                bricks.append(tuple(int(i) for i in np.flatnonzero(sub)))
    # dedupe while preserving first occurrence
    seen, out = set(), []
    for b in bricks:
        if b not in seen:
            seen.add(b)
            out.append(b)
    return out


def brick_cover(space: FiniteMetricSpace, eps: float) -> CoverFamily:
    """Cover a lattice-backed space by bricks of diameter below eps/6.

    The brick size is the largest window width whose diameter stays below
    eps/6 (singletons always qualify); the order never exceeds the number of
    axes along which the points vary.
    """
    if eps <= 0:
        raise CoverError("eps must be positive")
    if space.coords is None:
        raise CoverError("brick covers need lattice coordinates; supply a custom refiner")
    coords = space.coords
    active = [a for a in range(coords.shape[1]) if len(np.unique(coords[:, a])) > 1]
    bound = max(len(active), 0)

    def max_diam(m: int) -> float:
        return max(diameter(space.dist, b) for b in _build_bricks(coords, active, m))

    limit = eps / 6.0
    cap = max((int(coords[:, a].max() - coords[:, a].min()) + 1 for a in active), default=1)
    m = 1
    while m < cap and max_diam(m + 1) < limit:
        m += 1
    if m == 2 and len(active) >= 2:
        m = 1                      # 2-wide bricks cannot stagger; fall back
    bricks = _build_bricks(coords, active, m)
    family = CoverFamily(space, tuple(bricks), nominal_order_bound=bound)
    if not family.covers():
        raise CoverError("brick pattern failed to cover the space")
    got = order(family)
    if got > bound:
        raise CoverError(f"brick pattern has order {got} > {bound}")
    if max(diameter(space.dist, b) for b in bricks) >= limit:
        raise CoverError("brick diameters reach eps/6")
    return family


# ---------------------------------------------------------------------------
# net plus cover


@dataclass(frozen=True)
class NetAndCover:
    space: FiniteMetricSpace
    net: tuple[int, ...]
    sets: tuple[tuple[int, ...], ...]
    eps: float
    order_bound: int


def _prune_irredundant(sets: list[set], n: int) -> list[set]:
    """Drop members until no set is contained in the union of the others."""
    changed = True
    while changed:
        changed = False
        for i in range(len(sets)):
            rest = set().union(*(s for j, s in enumerate(sets) if j != i)) if len(sets) > 1 else set()
            if len(rest) == n:
                del sets[i]
                changed = True
                break
    return sets


def build_net_cover(space: FiniteMetricSpace, eps: float, refiner=brick_cover,
                    dist: np.ndarray | None = None) -> NetAndCover:
    """Separated net and merged cover from a fine cover of the space."""
    d = np.asarray(dist if dist is not None else space.dist, dtype=float)
    family = refiner(space, eps)
    if not family.covers():
        raise CoverError("refiner output does not cover the space")
    worst = max(diameter(d, s) for s in family.sets if s)
    if worst >= eps / 6.0:
        raise CoverError(f"refiner sets have diameter {worst:.6g} >= eps/6")
    r = family.nominal_order_bound
    base = space.base_index
    n = space.n

    sets = _prune_irredundant([set(s) for s in family.sets], n)
    # move one set containing the base point to the front, strip the base
    # point from all others (they still cover: each kept set has a private
    # point, which for the others cannot be the base point)
    first = next(i for i, s in enumerate(sets) if base in s)
    sets.insert(0, sets.pop(first))
    for s in sets[1:]:
        s.discard(base)
    sets = [s for s in sets if s]

    union_others = []
    for i in range(len(sets)):
        other = set().union(*(s for j, s in enumerate(sets) if j != i)) if len(sets) > 1 else set()
        union_others.append(other)
    reps = []
    for i, s in enumerate(sets):
        private = sorted(s - union_others[i])
        if not private:
            raise CoverError("pruning failed to leave a private point")
        reps.append(base if i == 0 else private[0])

    # greedy separated subfamily, base first, then first-index domination
    kept: list[int] = []
    for i, rep in enumerate(reps):
        if all(d[rep, reps[k]] > eps / 3.0 for k in kept):
            kept.append(i)
    assign = {}
    for i, rep in enumerate(reps):
        if i in kept:
            assign[i] = i
            continue
        cands = [k for k in kept if d[rep, reps[k]] <= eps / 3.0]
        assign[i] = min(cands, key=lambda k: (d[rep, reps[k]], k))

    merged = []
    net = []
    for k in kept:
        block = set()
        for i, s in enumerate(sets):
            if assign[i] == k:
                block |= s
        merged.append(tuple(sorted(block)))
        net.append(reps[k])
    return NetAndCover(space, tuple(net), tuple(merged), float(eps), int(r))


def verify_net_cover(nc: NetAndCover, dist: np.ndarray | None = None) -> Certificate:
    """Check membership, ball, separation, order and coverage clauses exactly."""
    d = np.asarray(dist if dist is not None else nc.space.dist, dtype=float)
    n = nc.space.n
    failures = []
    details = {}

    membership_ok = True
    for i, a in enumerate(nc.net):
        for j, s in enumerate(nc.sets):
            inside = a in s
            if inside != (i == j):
                membership_ok = False
                failures.append(("membership", i, j))
    details["membership"] = membership_ok

    ball_ok = True
    for i, (a, s) in enumerate(zip(nc.net, nc.sets)):
        for x in s:
            if not d[x, a] < nc.eps / 2.0:
                ball_ok = False
                failures.append(("ball", i, x))
    details["balls"] = ball_ok

    sep_ok = True
    for i, j in itertools.combinations(range(len(nc.net)), 2):
        if not d[nc.net[i], nc.net[j]] > nc.eps / 3.0:
            sep_ok = False
            failures.append(("separation", nc.net[i], nc.net[j]))
    details["separation"] = sep_ok

    got = order(nc.sets)
    details["order"] = got
    if got > nc.order_bound:
        failures.append(("order", got, nc.order_bound))

    covered = set()
    for s in nc.sets:
        covered.update(s)
    details["coverage"] = len(covered) == n
    if len(covered) != n:
        missing = sorted(set(range(n)) - covered)
        failures.append(("coverage", missing[0]))

    if nc.space.base_index not in nc.net or (nc.net and nc.net[0] != nc.space.base_index):
        failures.append(("base", nc.space.base_index))

    # density follows from coverage plus the ball clause; record it
    if details["coverage"] and nc.net:
        md = float(d[:, list(nc.net)].min(axis=1).max())
        details["net_density"] = md
        if not md <= nc.eps / 2.0:
            failures.append(("density", md))

    return make_certificate(
        "net-cover", 0.0, float(len(failures)), "le", 0.0,
        witnesses=failures[:8],
        inputs={"space": nc.space.key, "eps": nc.eps, "order_bound": nc.order_bound},
        details=details,
    )


def net_cover_to_json(nc: NetAndCover) -> dict:
    return {
        "sets": [list(s) for s in nc.sets],
        "net": list(nc.net),
        "eps": nc.eps,
        "order_bound": nc.order_bound,
    }


def net_cover_from_json(space: FiniteMetricSpace, obj: dict) -> NetAndCover:
    return NetAndCover(
        space,
        tuple(int(i) for i in obj["net"]),
        tuple(tuple(int(i) for i in s) for s in obj["sets"]),
        float(obj["eps"]),
        int(obj["order_bound"]),
    )
