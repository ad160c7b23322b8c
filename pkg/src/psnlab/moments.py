"""D-adic network moments with sparse normalization.

A moment is an average of 1{subnetwork in A} * h(attributes) over all
unordered D-tuples of distinct nodes, normalized by C(n,D) * p_n.  The
instrument is symmetrized over tuple orderings so unordered summation is
well defined.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import UndirectedNetwork, pair_order, subnetwork
from .model import DomainError

__all__ = [
    "SubnetworkEvent",
    "Instrument",
    "MomentSpec",
    "compute_moment",
    "estimate_p_n",
    "conditional_event_prob",
    "DegenerateNormalizationError",
    "MissingCellError",
]


class DegenerateNormalizationError(ValueError):
    pass


class MissingCellError(KeyError):
    pass


def _bit_count(pattern):
    return sum(pattern)


@dataclass(frozen=True)
class SubnetworkEvent:
    """Event A: a set of D(D-1)/2-bit configurations in canonical pair order."""

    d: int
    configurations: frozenset
    requires_link_to_first: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("polyad size must be at least 2")
        nbits = self.d * (self.d - 1) // 2
        configs = frozenset(tuple(int(b) for b in c) for c in self.configurations)
        if not configs:
            raise DomainError("event must be non-empty")
        for c in configs:
            if len(c) != nbits or any(b not in (0, 1) for b in c):
                raise DomainError(f"configuration {c!r} is not a {nbits}-bit pattern")
        object.__setattr__(self, "configurations", configs)
        # first-node pairs occupy the leading d-1 bit positions
        lead = self.d - 1
        object.__setattr__(
            self,
            "requires_link_to_first",
            all(any(c[k] for k in range(lead)) for c in configs),
        )

    @classmethod
    def single_link(cls):
        return cls(d=2, configurations=frozenset({(1,)}))

    @classmethod
    def full_support(cls, d):
        nbits = d * (d - 1) // 2
        return cls(d=d, configurations=frozenset(itertools.product((0, 1), repeat=nbits)))

    @classmethod
    def exact_links(cls, d, k):
        """All patterns with exactly k present edges (permutation-closed)."""
        nbits = d * (d - 1) // 2
        configs = frozenset(
            c for c in itertools.product((0, 1), repeat=nbits) if sum(c) == k
        )
        return cls(d=d, configurations=configs)

    @classmethod
    def triangle(cls):
        return cls(d=3, configurations=frozenset({(1, 1, 1)}))

    def link_counts(self):
        return sorted({_bit_count(c) for c in self.configurations})

    def is_permutation_closed(self) -> bool:
        """Closed under relabeling the D slots (needed for the cellwise path)."""
        pairs = pair_order(range(self.d))
        index = {p: k for k, p in enumerate(pairs)}
        for perm in itertools.permutations(range(self.d)):
            for c in self.configurations:
                moved = [0] * len(pairs)
                for k, (a, b) in enumerate(pairs):
                    pa, pb = perm[a], perm[b]
                    moved[index[(min(pa, pb), max(pa, pb))]] = c[k]
                if tuple(moved) not in self.configurations:
                    return False
        return True


@dataclass(frozen=True)
class Instrument:
    """Bounded instrument h(x_1..x_D; theta) -> R^q."""

    h: object
    q: int = 1
    bound: float = 1.0

    def __call__(self, xs, theta):
        out = np.atleast_1d(np.asarray(self.h(xs, theta), dtype=float))
        if out.shape != (self.q,):
            raise DomainError(f"instrument returned shape {out.shape}, expected ({self.q},)")
        if np.any(np.abs(out) > self.bound + 1e-9):
            raise DomainError("instrument exceeded its declared bound")
        return out

    @classmethod
    def constant(cls):
        return cls(h=lambda xs, theta: np.ones(1), q=1, bound=1.0)


@dataclass
class MomentSpec:
    event: SubnetworkEvent
    instrument: Instrument
    p_n: float | None = None

    def __post_init__(self):
        if self.p_n is not None and self.p_n <= 0:
            raise DomainError("p_n must be positive")


def _h_sym(instrument, xs, theta, cache):
    key = tuple(xs)
    got = cache.get(key)
    if got is not None:
        return got
    acc = np.zeros(instrument.q)
    perms = list(itertools.permutations(xs))
    for p in perms:
        acc += instrument(p, theta)
    acc /= len(perms)
    for p in perms:
        cache[tuple(p)] = acc
    return acc


def compute_moment(net: UndirectedNetwork, X, spec: MomentSpec, theta) -> np.ndarray:
    """Normalized D-adic moment [C(n,D) p_n]^{-1} sum 1{in A} h_sym."""
    if spec.p_n is None:
        raise DomainError("spec.p_n must be set before computing a moment")
    d = spec.event.d
    n = net.n
    if d > n:
        raise DomainError(f"polyad size {d} exceeds n={n}")
    if d == 2:
        total = _pair_sum(net, X, spec, theta)
    elif d == 3 and spec.event.is_permutation_closed() and n > 40:
        total = _triad_sum_closed(net, X, spec, theta)
    else:
        total = _stream_sum(net, X, spec, theta)
    return total / (math.comb(n, d) * spec.p_n)


def _cells(X):
    vals = sorted(set(float(x) for x in X))
    idx = {v: k for k, v in enumerate(vals)}
    lab = np.array([idx[float(x)] for x in X], dtype=np.int64)
    return vals, lab


def _pair_sum(net, X, spec, theta):
    vals, lab = _cells(X)
    k = len(vals)
    onehot = np.zeros((net.n, k))
    onehot[np.arange(net.n), lab] = 1.0
    linked = onehot.T @ net.matrix @ onehot  # ordered pair counts, linked
    counts = np.outer(onehot.sum(0), onehot.sum(0)) - np.diag(onehot.sum(0))
    cache = {}
    hmat = np.empty((k, k, spec.instrument.q))
    for a in range(k):
        for b in range(k):
            hmat[a, b] = _h_sym(spec.instrument, (vals[a], vals[b]), theta, cache)
    want1 = (1,) in spec.event.configurations
    want0 = (0,) in spec.event.configurations
    total = np.zeros(spec.instrument.q)
    if want1:
        total += 0.5 * np.einsum("ab,abq->q", linked, hmat)
    if want0:
        total += 0.5 * np.einsum("ab,abq->q", counts - linked, hmat)
    return total


def _stream_sum(net, X, spec, theta):
    n = net.n
    d = spec.event.d
    if math.comb(n, d) > 3_000_000:
        raise DomainError(
            f"streaming over C({n},{d}) tuples refused; supply a smaller network"
        )
    cache = {}
    total = np.zeros(spec.instrument.q)
    configs = spec.event.configurations
    mat = net.matrix
    for nodes in itertools.combinations(range(n), d):
        bits = tuple(int(mat[i, j]) for i, j in pair_order(nodes))
        if bits in configs:
            total += _h_sym(spec.instrument, tuple(X[i] for i in nodes), theta, cache)
    return total


def _triad_sum_closed(net, X, spec, theta):
    """Cellwise triad accumulation for permutation-closed events.

    Per cell multiset: m3 = triangles, m2 = wedges - 3*m3,
    m1 = (sum of per-triple edge counts) - 2*m2 - 3*m3, m0 = remainder.
    """
    vals, lab = _cells(X)
    k = len(vals)
    n = net.n
    adj = net.matrix
    n_c = np.bincount(lab, minlength=k).astype(float)
    nbr_by_cell = adj @ np.eye(k)[lab]  # (n, k)

    tri = {}
    wedges = {}
    edgesum = {}

    # wedges: per center node, unordered end-cell pairs
    for a in range(k):
        for b in range(a, k):
            if a == b:
                cnt = nbr_by_cell[:, a] * (nbr_by_cell[:, a] - 1) / 2.0
            else:
                cnt = nbr_by_cell[:, a] * nbr_by_cell[:, b]
            for c in range(k):
                key = tuple(sorted((c, a, b)))
                wedges[key] = wedges.get(key, 0.0) + float(cnt[lab == c].sum())

    # triangles: per edge, common neighbors by cell (each triangle seen from 3 edges)
    ii, jj = np.nonzero(np.triu(adj, k=1))
    for c in range(k):
        mask = lab == c
        common_c = (adj[ii][:, mask] & adj[jj][:, mask]).sum(axis=1).astype(float)
        for a in range(k):
            for b in range(a, k):
                sel = ((lab[ii] == a) & (lab[jj] == b)) | ((lab[ii] == b) & (lab[jj] == a))
                key = tuple(sorted((a, b, c)))
                tri[key] = tri.get(key, 0.0) + float(common_c[sel].sum())
    tri = {key: v / 3.0 for key, v in tri.items()}

    # sum over triples of #edges: each edge paired with every third node
    for a in range(k):
        for b in range(a, k):
            sel = ((lab[ii] == a) & (lab[jj] == b)) | ((lab[ii] == b) & (lab[jj] == a))
            cnt = float(sel.sum())
            for c in range(k):
                third = n_c[c] - (1.0 if c == a else 0.0) - (1.0 if c == b else 0.0)
                key = tuple(sorted((a, b, c)))
                edgesum[key] = edgesum.get(key, 0.0) + cnt * third

    by_links = {m: any(_bit_count(c) == m for c in spec.event.configurations) for m in range(4)}
    cache = {}
    total = np.zeros(spec.instrument.q)
    for key in itertools.combinations_with_replacement(range(k), 3):
        m3 = tri.get(key, 0.0)
        m2 = wedges.get(key, 0.0) - 3.0 * m3
        m1 = edgesum.get(key, 0.0) - 2.0 * m2 - 3.0 * m3
        m0 = _multiset_triples(key, n_c) - m1 - m2 - m3
        h = _h_sym(spec.instrument, tuple(vals[c] for c in key), theta, cache)
        for m, cnt in ((0, m0), (1, m1), (2, m2), (3, m3)):
            if by_links[m]:
                total += cnt * h
    return total


def _multiset_triples(key, n_c):
    a, b, c = key
    if a == b == c:
        return n_c[a] * (n_c[a] - 1) * (n_c[a] - 2) / 6.0
    if a == b:
        return n_c[a] * (n_c[a] - 1) / 2.0 * n_c[c]
    if b == c:
        return n_c[b] * (n_c[b] - 1) / 2.0 * n_c[a]
    return n_c[a] * n_c[b] * n_c[c]


def estimate_p_n(replications, event: SubnetworkEvent) -> float:
    """Pooled empirical frequency of the event over all tuples and replications.

    replications: iterable of (UndirectedNetwork, X) pairs.
    """
    hits = 0.0
    tuples = 0
    unit = MomentSpec(event=event, instrument=Instrument.constant(), p_n=1.0)
    for net, X in replications:
        freq = compute_moment(net, X, unit, theta=None)[0]
        hits += freq * math.comb(net.n, event.d)
        tuples += math.comb(net.n, event.d)
    if tuples == 0:
        raise DegenerateNormalizationError("no replications supplied")
    p_hat = hits / tuples
    if p_hat <= 0.0:
        raise DegenerateNormalizationError("event never occurred; p_n estimate degenerate")
    return p_hat


def conditional_event_prob(replications, event: SubnetworkEvent, x_cell) -> float:
    """Empirical frequency of the event among tuples with the given attribute
    multiset (sorted tuple of attribute values)."""
    cell = tuple(sorted(float(v) for v in x_cell))
    hits = 0
    total = 0
    for net, X in replications:
        mat = net.matrix
        for nodes in itertools.combinations(range(net.n), event.d):
            if tuple(sorted(float(X[i]) for i in nodes)) != cell:
                continue
            total += 1
            bits = tuple(int(mat[i, j]) for i, j in pair_order(nodes))
            if bits in event.configurations:
                hits += 1
    if total == 0:
        raise MissingCellError(f"attribute cell {cell} never observed")
    return hits / total


def exclusivity_diagnostic(psn_set, polyad, event: SubnetworkEvent) -> bool:
    """True when two or more elementary patterns of the event are supported by
    pairwise stable networks of the same shock draw (violating the composite
    event requirement).  Requires the enumeration oracle's output."""
    seen = set()
    for net in psn_set:
        bits = subnetwork(net, polyad)
        if bits in event.configurations:
            seen.add(bits)
    return len(seen) > 1
