"""Pairwise stability: checking, selection dynamics, enumeration oracle,
potential values and relevant overlap.

Convention for evaluating the marginal benefit of a link ij: the statistics
(s_i, s_j, t_ij) entering U* are those of the network with the edge ij
present (for an existing edge that is the current graph; for an absent edge
the graph with the edge added).  This is the incremental-benefit reading of
the stability definition and is applied uniformly here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .graph import (
    EdgeSet,
    ProposalNetwork,
    UndirectedNetwork,
    edge_statistic,
    node_statistic,
    stable_from_proposals,
)
from .model import DomainError, PayoffModel, scaling, draw_marginal_cost

__all__ = [
    "ShockRealization",
    "PotentialValueQuery",
    "OverlapClass",
    "CycleReport",
    "draw_shocks",
    "is_pairwise_stable",
    "enumerate_psn",
    "tatonnement",
    "potential_values",
    "relevant_overlap",
]

N_MAX_DEFAULT = 6

# fixed zobrist keys so hashes are stable across processes
_ZOBRIST_SEED = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class ShockRealization:
    """One complete draw of taste shocks and marginal costs for n nodes."""

    epsilon: np.ndarray  # (n, n), raw shocks, diagonal unused
    mc: np.ndarray  # (n,), marginal costs (already on the sigma_n scale)
    seed: int

    @property
    def n(self):
        return self.mc.shape[0]


def draw_shocks(model: PayoffModel, n: int, rng, seed=0) -> ShockRealization:
    scal = scaling(n, model.shock)
    eps = model.shock.draw(rng, (n, n))
    np.fill_diagonal(eps, 0.0)
    mc = np.asarray(draw_marginal_cost(scal, model.shock, rng, size=n), dtype=float)
    return ShockRealization(epsilon=eps, mc=mc, seed=int(seed))


def _statusquo_stats(model: PayoffModel, net: UndirectedNetwork, X, i, j):
    """(s_i, s_j, t_ij) evaluated at the network with edge ij present."""
    had = net.has_edge(i, j)
    if not had:
        net.add_edge(i, j)
    si = node_statistic(model.node_stat, net, X, i)
    sj = node_statistic(model.node_stat, net, X, j)
    t = (
        edge_statistic(model.edge_stat, net, X, i, j)
        if model.edge_stat is not None
        else model.t_default
    )
    if not had:
        net.remove_edge(i, j)
    return si, sj, t


def pair_marginal_benefits(model: PayoffModel, net: UndirectedNetwork, X, i, j):
    """Systematic parts (U*_ij, U*_ji) under the status-quo convention."""
    si, sj, t = _statusquo_stats(model, net, X, i, j)
    return model.payoff(X[i], X[j], si, sj, t), model.payoff(X[j], X[i], sj, si, t)


def _mutual_ok(model, net, X, shocks, sigma, i, j):
    uij, uji = pair_marginal_benefits(model, net, X, i, j)
    ok_ij = uij + sigma * shocks.epsilon[i, j] >= shocks.mc[i]
    ok_ji = uji + sigma * shocks.epsilon[j, i] >= shocks.mc[j]
    return bool(ok_ij and ok_ji)


def is_pairwise_stable(net: UndirectedNetwork, model: PayoffModel, shocks, X) -> bool:
    """Definition-level check: present links mutually beneficial, absent
    links blocked by at least one side."""
    n = net.n
    if shocks.n != n or len(X) != n:
        raise DomainError("dimension mismatch between network, shocks and attributes")
    sigma = scaling(n, model.shock).sigma_n
    if model.edge_stat is None and model.node_stat.kind == "degree":
        return _is_stable_degree_fast(net, model, shocks, X, sigma)
    work = net.copy()
    for i in range(n):
        for j in range(i + 1, n):
            if _mutual_ok(model, work, X, shocks, sigma, i, j) != net.has_edge(i, j):
                return False
    return True


def _payoff_lookup(model: PayoffModel, X):
    """(U-table, x-index vector) for degree-kind vectorized paths."""
    utab = model.payoff_grid()
    xi = np.array([model.type_space.index_of(x) for x in X], dtype=np.int64)
    return utab, xi


def _is_stable_degree_fast(net, model, shocks, X, sigma) -> bool:
    utab, xi = _payoff_lookup(model, X)
    cap = model.node_stat.cap
    adj = net.matrix
    deg = adj.sum(axis=1)
    # status-quo degree of each node for each pair: own degree with ij forced on
    s_row = np.minimum(deg[:, None] + (~adj), cap)  # s_i in the (i,j) check
    u_ij = utab[xi[:, None], xi[None, :], s_row, s_row.T]
    ok = u_ij + sigma * shocks.epsilon >= shocks.mc[:, None]
    mutual = ok & ok.T
    np.fill_diagonal(mutual, False)
    return bool(np.array_equal(mutual, adj))


def _all_graph_bits(n):
    pairs = list(itertools.combinations(range(n), 2))
    m = len(pairs)
    codes = np.arange(1 << m, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(m)[None, :]) & 1
    return pairs, bits.astype(np.int8)


def enumerate_psn(model: PayoffModel, shocks, X, n_max=N_MAX_DEFAULT):
    """Exhaustive oracle: the exact set of PSNs for the realized shocks.

    Exponential in C(n,2); refuses n above n_max.
    """
    n = shocks.n
    if n > n_max:
        raise DomainError(f"enumeration refused for n={n} > n_max={n_max}")
    sigma = scaling(n, model.shock).sigma_n
    if model.edge_stat is None and model.node_stat.kind == "degree":
        return _enumerate_degree_fast(model, shocks, X, sigma)
    out = []
    pairs, bits = _all_graph_bits(n)
    for row in bits:
        net = UndirectedNetwork(n, edges=[p for p, b in zip(pairs, row) if b])
        if is_pairwise_stable(net, model, shocks, X):
            out.append(net)
    return out


def _enumerate_degree_fast(model, shocks, X, sigma):
    n = shocks.n
    utab, xi = _payoff_lookup(model, X)
    cap = model.node_stat.cap
    pairs, bits = _all_graph_bits(n)
    inc = np.zeros((len(pairs), n), dtype=np.int8)
    for k, (i, j) in enumerate(pairs):
        inc[k, i] = 1
        inc[k, j] = 1
    deg = bits @ inc  # (G, n)
    ii = np.array([p[0] for p in pairs])
    jj = np.array([p[1] for p in pairs])
    si = np.minimum(deg[:, ii] + (1 - bits), cap)
    sj = np.minimum(deg[:, jj] + (1 - bits), cap)
    u_ij = utab[xi[ii][None, :], xi[jj][None, :], si, sj]
    u_ji = utab[xi[jj][None, :], xi[ii][None, :], sj, si]
    ok = (u_ij + sigma * shocks.epsilon[ii, jj][None, :] >= shocks.mc[ii][None, :]) & (
        u_ji + sigma * shocks.epsilon[jj, ii][None, :] >= shocks.mc[jj][None, :]
    )
    stable = np.all(ok == bits.astype(bool), axis=1)
    out = []
    for row in bits[stable]:
        out.append(UndirectedNetwork(n, edges=[p for p, b in zip(pairs, row) if b]))
    return out


@dataclass(frozen=True)
class CycleReport:
    """Terminal report of a non-convergent tatonnement run (a value, not an error)."""

    converged: bool
    sweeps: int
    trail_length: int
    reason: str  # "cycle" or "max_sweeps"


_ZOBRIST_CACHE = {}


def _zobrist_keys(n):
    keys = _ZOBRIST_CACHE.get(n)
    if keys is None:
        rng = np.random.default_rng(_ZOBRIST_SEED)
        keys = rng.integers(1, 2**63 - 1, size=(n, n), dtype=np.int64)
        keys.setflags(write=False)
        _ZOBRIST_CACHE[n] = keys
    return keys


def tatonnement(
    model: PayoffModel,
    shocks,
    X,
    rng,
    max_sweeps=200,
    history_window=1024,
    init=None,
):
    """Myopic link-by-link updating from a uniformly random initial graph.

    Visits all pairs in a freshly randomized order each sweep, replacing
    L_ij by the mutual-consent indicator at the current graph.  A sweep with
    no change certifies pairwise stability of the output.  Repeated states
    (zobrist hash over a bounded history window) or the sweep cap produce a
    CycleReport instead.
    """
    n = shocks.n
    sigma = scaling(n, model.shock).sigma_n
    net = init.copy() if init is not None else None
    if net is None:
        net = UndirectedNetwork(n)
        mask = np.triu(rng.random((n, n)) < 0.5, k=1)
        net._adj[:] = mask | mask.T
    keys = _zobrist_keys(n)
    h = 0
    for i, j in net.edge_list():
        h ^= int(keys[i, j])
    seen = {h: 0}
    order = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for sweep in range(1, max_sweeps + 1):
        rng.shuffle(order)
        changed = False
        for i, j in order:
            new = _mutual_ok(model, net, X, shocks, sigma, i, j)
            if new != net.has_edge(i, j):
                (net.add_edge if new else net.remove_edge)(i, j)
                h ^= int(keys[i, j])
                changed = True
        if not changed:
            return net
        if h in seen:
            return CycleReport(
                converged=False, sweeps=sweep, trail_length=len(seen), reason="cycle"
            )
        seen[h] = sweep
        if len(seen) > history_window:
            seen.pop(min(seen, key=seen.get))
    return CycleReport(
        converged=False, sweeps=max_sweeps, trail_length=len(seen), reason="max_sweeps"
    )


@dataclass(frozen=True)
class PotentialValueQuery:
    """Pinned proposals on e1 (equilibrium responds) and mechanical edits on e2."""

    e1: EdgeSet
    d_e1: tuple
    e2: EdgeSet
    d_e2: tuple
    target: object  # node index, or (i, j) pair for edge statistics

    def __post_init__(self):
        if len(self.d_e1) != len(self.e1) or len(self.d_e2) != len(self.e2):
            raise DomainError("proposal bit vectors must match edge-set lengths")


def potential_values(
    query: PotentialValueQuery, model: PayoffModel, shocks, X, n_max=N_MAX_DEFAULT
):
    """Set of statistic values supported by some PSN under the pinning.

    Enumerates candidate stable networks given the pinned proposals on e1,
    then applies the e2 edits mechanically (direct undirected overwrite) and
    reads the target statistic off the edited network.
    """
    n = shocks.n
    if n > n_max:
        raise DomainError(f"potential-value enumeration refused for n={n} > n_max={n_max}")
    sigma = scaling(n, model.shock).sigma_n
    pinned = {tuple(col): bool(b) for col, b in zip(query.e1.columns, query.d_e1)}
    values = set()
    pairs, bits = _all_graph_bits(n)
    for row in bits:
        net = UndirectedNetwork(n, edges=[p for p, b in zip(pairs, row) if b])
        d = ProposalNetwork(n)
        consistent = True
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if (i, j) in pinned:
                    d.set(i, j, pinned[(i, j)])
                else:
                    uij, _ = pair_marginal_benefits(model, net, X, i, j)
                    d.set(i, j, uij + sigma * shocks.epsilon[i, j] >= shocks.mc[i])
        if not np.array_equal(stable_from_proposals(d).matrix, net.matrix):
            consistent = False
        if not consistent:
            continue
        edited = net.copy()
        for (a, b), bit in zip(query.e2.columns, query.d_e2):
            if bit:
                edited.add_edge(a, b)
            else:
                edited.remove_edge(a, b)
        if isinstance(query.target, tuple):
            values.add(edge_statistic(model.edge_stat, edited, X, *query.target))
        else:
            values.add(node_statistic(model.node_stat, edited, X, query.target))
    return values


@dataclass(frozen=True)
class OverlapClass:
    """Finite label for how a pinned edge set mechanically touches the target."""

    kind: str
    label: tuple


def relevant_overlap(spec, e: EdgeSet, l_e, X, targets) -> OverlapClass:
    """Sufficient statistic of the pinned subnetwork for the target's statistic.

    degree: count of pinned-on links incident to the target (the single bit
    in the canonical one-source case).  composition_share: (count, flagged
    count).  transitive kinds: indicator that some pinned source closes a
    triangle over the target pair.
    """
    bits = tuple(int(b) for b in l_e)
    if len(bits) != len(e):
        raise DomainError("bit vector must match edge-set length")
    if spec.kind == "degree":
        j = int(targets if np.isscalar(targets) else targets[0])
        cnt = sum(b for (a, c), b in zip(e.columns, bits) if j in (a, c))
        return OverlapClass(kind="degree", label=(min(cnt, spec.cap),))
    if spec.kind == "composition_share":
        j = int(targets if np.isscalar(targets) else targets[0])
        on = [(a, c) for (a, c), b in zip(e.columns, bits) if b and j in (a, c)]
        flagged = sum(
            1 for (a, c) in on if float(X[a if c == j else c]) == spec.flag_value
        )
        return OverlapClass(kind="composition_share", label=(len(on), flagged))
    if spec.kind in ("transitive_count", "transitive_indicator"):
        if np.isscalar(targets) or len(tuple(targets)) != 2:
            raise DomainError("transitive overlap targets a node pair")
        j, k = (int(t) for t in targets)
        on = {(a, c) for (a, c), b in zip(e.columns, bits) if b}
        on |= {(c, a) for (a, c) in on}
        sources = {a for (a, c) in on} | {c for (a, c) in on}
        closes = any(((m, j) in on and (m, k) in on) for m in sources if m not in (j, k))
        return OverlapClass(kind=spec.kind, label=(int(closes),))
    raise DomainError(f"unsupported statistic kind {spec.kind!r}")
