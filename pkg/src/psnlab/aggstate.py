"""Aggregate state variables: inclusive value function and reference
distribution, their empirical versions, fixed-point solvers, and the limit
moment.

Conventions (see README for the derivation sketch):

* Reference distribution M(x,s|R): Poisson intensity over attribute/statistic
  cells per overlap class R in {0,1}; class mass Lambda = exp(2*u_bar), the
  limiting rate at which mutually pre-available partners arrive.  The stored
  s-profile is the population law of potential values given the conjectured
  class; the availability-tilted profile actually seen by a node's
  pre-neighborhood is carried separately (``AggregateState.arrival``) and the
  two are linked by s1 * M(x,s1|1) / (1+H(x,s1)) = Lambda * tilted(x, s1-1).

* The limit "ego process": a node's marginal-cost fluctuation enters through
  v ~ Exp(1); its pre-neighborhood is Poisson(Lambda * v) over tilted cells;
  conditional on pre-availability each side accepts with exp(U* - u_bar), so
  the count d of realized links integrates to weights I^d / (1+I)^{d+1} with
  I the cell-resolved inclusive rate.  All solver and limit-moment formulas
  are exact expectations under this process.

Only degree-kind node statistics (radius 1) are supported by the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import UndirectedNetwork, ProposalNetwork
from .model import DomainError, PayoffModel, scaling
from .moments import MomentSpec, _h_sym

__all__ = [
    "InclusiveValueFn",
    "ReferenceDistribution",
    "AggregateState",
    "FixedPointDiagnostics",
    "proposals_from_shocks",
    "empirical_inclusive_value",
    "empirical_inclusive_values_all",
    "empirical_reference_distribution",
    "psi2_apply",
    "solve_inclusive_value",
    "psi1_apply",
    "solve_joint",
    "limit_moment",
    "scalar_closed_form",
]

OVERLAP_CLASSES = (0, 1)


@dataclass
class InclusiveValueFn:
    """Nonnegative table H(x, s) over the attribute/statistic grid."""

    table: np.ndarray  # (K, S)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if np.any(~np.isfinite(self.table)) or np.any(self.table < 0):
            raise DomainError("inclusive values must be finite and nonnegative")

    def sup_distance(self, other):
        return float(np.max(np.abs(self.table - other.table)))


@dataclass
class ReferenceDistribution:
    """Per-overlap-class intensity tables over (x, s) cells (mean measures)."""

    tables: dict  # class R -> (K, S) array

    def __post_init__(self):
        self.tables = {int(r): np.asarray(t, dtype=float) for r, t in self.tables.items()}
        for r, t in self.tables.items():
            if np.any(t < -1e-12) or np.any(~np.isfinite(t)):
                raise DomainError(f"class {r} intensity must be finite and nonnegative")
            self.tables[r] = np.maximum(t, 0.0)

    def table(self, r=1):
        return self.tables[int(r)]

    def mass(self, r=1):
        return float(self.tables[int(r)].sum())

    def empty_classes(self):
        return [r for r, t in self.tables.items() if t.sum() <= 0.0]

    def sup_distance(self, other):
        return max(
            float(np.max(np.abs(self.tables[r] - other.tables[r]))) for r in self.tables
        )


@dataclass
class AggregateState:
    m: ReferenceDistribution
    eta: InclusiveValueFn
    arrival: np.ndarray  # (K, S) availability-tilted class-0 intensity
    lam: float

    def cell_grids(self, model):
        return model.type_space.values, model.node_stat.support


@dataclass
class FixedPointDiagnostics:
    iterations: int
    final_residual: float
    contraction_ratios: list
    converged: bool
    extra: dict = field(default_factory=dict)


def _require_degree(model: PayoffModel, what):
    if model.node_stat.kind != "degree" or model.edge_stat is not None:
        raise DomainError(
            f"{what} supports degree-kind node statistics without edge effects only"
        )


def _degree_pair_tables(model, net, X):
    """Status-quo U* matrices and proposal indicators for a realized network."""
    utab = model.payoff_grid()
    xi = np.array([model.type_space.index_of(x) for x in X], dtype=np.int64)
    cap = model.node_stat.cap
    adj = net.matrix
    deg = adj.sum(axis=1)
    s_row = np.minimum(deg[:, None] + (~adj), cap)
    u = utab[xi[:, None], xi[None, :], s_row, s_row.T]  # U*_ij at the ij-present stats
    return u, xi


def proposals_from_shocks(net: UndirectedNetwork, model, shocks, X) -> ProposalNetwork:
    """Directed acceptance indicators D*_ij implied by the realized network."""
    _require_degree(model, "proposals_from_shocks")
    sigma = scaling(net.n, model.shock).sigma_n
    u, _ = _degree_pair_tables(model, net, X)
    d = u + sigma * shocks.epsilon >= shocks.mc[:, None]
    np.fill_diagonal(d, False)
    return ProposalNetwork.from_matrix(d)


def empirical_inclusive_value(net, proposals, model, X, i) -> float:
    """I*_i = n^{-1/2} sum_j D*_ji exp(U*_ij)."""
    _require_degree(model, "empirical_inclusive_value")
    u, _ = _degree_pair_tables(model, net, X)
    incoming = proposals.matrix[:, i].astype(float)
    incoming[i] = 0.0
    return float(np.sum(incoming * np.exp(u[i])) / math.sqrt(net.n))


def empirical_inclusive_values_all(net, model, shocks, X):
    """Vector of I*_i for all nodes plus the proposal matrix used."""
    _require_degree(model, "empirical_inclusive_values_all")
    sigma = scaling(net.n, model.shock).sigma_n
    u, _ = _degree_pair_tables(model, net, X)
    d = u + sigma * shocks.epsilon >= shocks.mc[:, None]
    np.fill_diagonal(d, False)
    vals = (d.T.astype(float) * np.exp(u)).sum(axis=1) / math.sqrt(net.n)
    return vals, d


def empirical_reference_distribution(net, model, shocks, X) -> ReferenceDistribution:
    """Empirical intensity of pre-available partners by (x, s*(R)) cell.

    Pre-availability of the ordered pair (k, i) is D0_ki * D0_ik with
    D0_ki = 1{u_bar + sigma eps_ki >= MC_k}.  The potential value s*_k(R)
    toggles the (k,i) edge mechanically to R before reading the statistic.
    Per-class denominators count all ordered pairs (every pair admits every
    conjectured class), i.e. (n-1)/n after the 1/n^2 normalization.
    """
    if model.node_stat.kind not in ("degree", "composition_share"):
        raise DomainError("reference distribution is over node statistics")
    n = net.n
    sigma = scaling(n, model.shock).sigma_n
    pre = model.u_bar + sigma * shocks.epsilon >= shocks.mc[:, None]
    np.fill_diagonal(pre, False)
    pre_pair = pre & pre.T

    k = model.type_space.k
    support = model.node_stat.support
    s_index = {v: i for i, v in enumerate(support)}
    xi = np.array([model.type_space.index_of(x) for x in X], dtype=np.int64)
    tables = {r: np.zeros((k, len(support))) for r in OVERLAP_CLASSES}
    adj = net.matrix
    deg = adj.sum(axis=1)

    kk, ii = np.nonzero(pre_pair)
    for a, b in zip(kk.tolist(), ii.tolist()):
        for r in OVERLAP_CLASSES:
            if model.node_stat.kind == "degree":
                s = min(int(deg[a]) - int(adj[a, b]) + r, model.node_stat.cap)
            else:
                work = net.copy()
                if r:
                    work._adj[a, b] = work._adj[b, a] = True
                else:
                    work._adj[a, b] = work._adj[b, a] = False
                from .graph import node_statistic

                s = node_statistic(model.node_stat, work, X, a)
            tables[r][xi[a], s_index[s]] += 1.0
    denom = (n - 1) / n  # (1/n^2) * n(n-1) ordered pairs per conjectured class
    for r in OVERLAP_CLASSES:
        tables[r] /= n * denom
    return ReferenceDistribution(tables=tables)


# --- fixed-point maps ------------------------------------------------------


def _pair_weight_grid(model: PayoffModel):
    """w[x, x', sigma, s0'] = exp(U*(x,x';sigma,s1') + U*(x',x;s1',sigma) - 2 u_bar)
    with s1' = min(s0'+1, cap), the linked partner's class-1 statistic."""
    utab = model.payoff_grid()
    cap = model.node_stat.cap
    s1 = np.minimum(np.arange(cap + 1) + 1, cap)
    u_fwd = utab[:, :, :, s1]  # U*(x, x'; sigma, s1')
    u_bwd = np.transpose(utab, (1, 0, 3, 2))[:, :, :, s1]  # U*(x', x; s1', sigma)
    return np.exp(u_fwd + u_bwd - 2.0 * model.u_bar)


def psi2_apply(m: ReferenceDistribution, eta: InclusiveValueFn, model) -> InclusiveValueFn:
    """One application of the inclusive-value map.

    H'(x,s) = sum_{x',s'} s1' * exp(U*(x,x';s,s',t0) + U*(x',x;s',s,t0) - 2 u_bar)
              * M(x',s'|link class) / (1 + H(x',s')).
    """
    _require_degree(model, "psi2_apply")
    utab = model.payoff_grid()
    s_vals = np.asarray(model.node_stat.support, dtype=float)
    m1 = m.table(1)
    weight = s_vals[None, :] * m1 / (1.0 + eta.table)  # (K', S')
    core = np.exp(
        utab + np.transpose(utab, (1, 0, 3, 2)) - 2.0 * model.u_bar
    )  # (x, x', s, s')
    new = np.einsum("abst,bt->as", core, weight)
    return InclusiveValueFn(table=new)


def solve_inclusive_value(m, model, tol=1e-10, max_iter=200):
    """Iterate log H -> log Psi2[M, H] from H = 1 until the sup-norm
    log-residual drops below tol; records per-step contraction ratios."""
    _require_degree(model, "solve_inclusive_value")
    k, ns = model.type_space.k, model.node_stat.size
    eta = InclusiveValueFn(table=np.ones((k, ns)))
    probe = psi2_apply(m, eta, model)
    if probe.table.max() <= 0.0:
        diag = FixedPointDiagnostics(
            iterations=0, final_residual=0.0, contraction_ratios=[], converged=True
        )
        return InclusiveValueFn(table=np.zeros((k, ns))), diag

    residuals = []
    for it in range(1, max_iter + 1):
        new = psi2_apply(m, eta, model)
        res = float(np.max(np.abs(np.log(new.table) - np.log(eta.table))))
        residuals.append(res)
        eta = new
        if res < tol:
            ratios = [
                residuals[i] / residuals[i - 1]
                for i in range(1, len(residuals))
                if residuals[i - 1] > 0
            ]
            return eta, FixedPointDiagnostics(
                iterations=it,
                final_residual=res,
                contraction_ratios=ratios,
                converged=True,
                extra={"bound": contraction_bound(m, model)},
            )
    ratios = [
        residuals[i] / residuals[i - 1] for i in range(1, len(residuals)) if residuals[i - 1] > 0
    ]
    return eta, FixedPointDiagnostics(
        iterations=max_iter,
        final_residual=residuals[-1],
        contraction_ratios=ratios,
        converged=False,
        extra={"bound": contraction_bound(m, model)},
    )


def contraction_bound(m, model) -> float:
    """Theoretical contraction constant B_s e^{2U} / (1 + B_s e^{2U}) with
    B_s the maximal conditional mean degree under the link-class measure."""
    s_vals = np.asarray(model.node_stat.support, dtype=float)
    m1 = m.table(1)
    mass = m1.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_mean = np.where(mass > 0, (m1 * s_vals[None, :]).sum(axis=1) / mass, 0.0)
    b_s = float(cond_mean.max()) if cond_mean.size else 0.0
    z = b_s * math.exp(2.0 * model.u_bar)
    return z / (1.0 + z)


def arrival_from(m: ReferenceDistribution, eta: InclusiveValueFn, model) -> np.ndarray:
    """Availability-tilted class-0 arrival intensity reconstructed from (M, H):
    Lambda * tilted(x, s0) = (s0+1) * M(x, s0+1 | 1) / (1 + H(x, s0+1))."""
    cap = model.node_stat.cap
    s_vals = np.asarray(model.node_stat.support, dtype=float)
    m1 = m.table(1)
    arrival = np.zeros_like(m1)
    for s1 in range(1, cap + 1):
        arrival[:, s1 - 1] += s_vals[s1] * m1[:, s1] / (1.0 + eta.table[:, s1])
    return arrival


def ego_inclusive_rates(model: PayoffModel, arrival: np.ndarray) -> np.ndarray:
    """I(x, sigma) = sum over tilted cells of arrival * pair weight."""
    w = _pair_weight_grid(model)  # (x, x', sigma, s0')
    return np.einsum("abcd,bd->ac", w, arrival)


def _ego_count_pmf(i_by_sigma, pin, cap, budget=512, tail=1e-13):
    """P(d) with the status-quo convention: each candidate d uses
    I_d = I(clamp(d + pin)); weights I_d^d / (1+I_d)^{d+1}, normalized."""
    weights = []
    total = 0.0
    d = 0
    while d < budget:
        sig = min(d + pin, cap)
        i_d = i_by_sigma[sig]
        logw = d * math.log(i_d) - (d + 1) * math.log1p(i_d) if i_d > 0 else (
            0.0 if d == 0 else -math.inf
        )
        w = math.exp(logw) if logw > -700 else 0.0
        weights.append(w)
        total += w
        # geometric tail once the cap freezes the rate
        if d >= cap and (w <= tail * max(total, 1e-300) or i_d == 0.0):
            break
        d += 1
    arr = np.asarray(weights)
    s = arr.sum()
    return arr / s if s > 0 else np.eye(1, len(arr), 0).ravel()


def psi1_apply(m, eta, model, neighborhood_budget=512) -> ReferenceDistribution:
    """One application of the reference-distribution map.

    Reconstructs the tilted arrival measure from (M, H), runs the exact limit
    ego process for each attribute and conjectured class, and returns the
    population potential-value intensities with class mass exp(2 u_bar).
    """
    _require_degree(model, "psi1_apply")
    cap = model.node_stat.cap
    k = model.type_space.k
    lam = math.exp(2.0 * model.u_bar)
    arrival = arrival_from(m, eta, model)
    rates = ego_inclusive_rates(model, arrival)  # (K, S)
    weights = np.asarray(model.type_space.weights)
    tables = {r: np.zeros((k, cap + 1)) for r in OVERLAP_CLASSES}
    for r in OVERLAP_CLASSES:
        for a in range(k):
            pmf = _ego_count_pmf(rates[a], r, cap, budget=neighborhood_budget)
            for d, p in enumerate(pmf):
                s = min(d + r, cap)
                tables[r][a, s] += lam * weights[a] * p
    return ReferenceDistribution(tables=tables)


def tilted_profile(model, arrival_seed, neighborhood_budget=512):
    """Fixed availability-tilted profile implied by an arrival intensity:
    tilted'(x, d) proportional to P_X(x) * (d+1) I_d^d / (1+I_d)^{d+2}."""
    cap = model.node_stat.cap
    k = model.type_space.k
    rates = ego_inclusive_rates(model, arrival_seed)
    weights = np.asarray(model.type_space.weights)
    out = np.zeros((k, cap + 1))
    for a in range(k):
        vals = []
        d = 0
        while d < neighborhood_budget:
            sig = min(d, cap)
            i_d = rates[a][sig]
            if i_d > 0:
                logw = math.log(d + 1.0) + d * math.log(i_d) - (d + 2) * math.log1p(i_d)
                w = math.exp(logw)
            else:
                w = 1.0 if d == 0 else 0.0
            vals.append(w)
            if d >= cap and (w <= 1e-13 * max(sum(vals), 1e-300) or i_d == 0.0):
                break
            d += 1
        arr = np.asarray(vals)
        arr = arr / arr.sum() if arr.sum() > 0 else arr
        for d, p in enumerate(arr):
            out[a, min(d, cap)] += weights[a] * p
    return out


def solve_joint(
    model,
    tol=1e-8,
    max_outer=500,
    damping=0.5,
    eta_tol=1e-10,
    starts=5,
    rng=None,
    neighborhood_budget=512,
):
    """Alternate solve_inclusive_value with a damped psi1 update until the
    joint sup-norm residual is below tol; multi-start surfaces multiplicity."""
    _require_degree(model, "solve_joint")
    rng = rng if rng is not None else np.random.default_rng(0)
    k, ns = model.type_space.k, model.node_stat.size
    lam = math.exp(2.0 * model.u_bar)
    weights = np.asarray(model.type_space.weights)

    inits = []
    base = {r: np.zeros((k, ns)) for r in OVERLAP_CLASSES}
    for r in OVERLAP_CLASSES:
        base[r][:, min(r, ns - 1)] = lam * weights
    inits.append(ReferenceDistribution(tables=base))
    uni = {r: lam * np.outer(weights, np.ones(ns) / ns) for r in OVERLAP_CLASSES}
    inits.append(ReferenceDistribution(tables=uni))
    while len(inits) < max(starts, 1):
        rand = {}
        for r in OVERLAP_CLASSES:
            t = rng.random((k, ns))
            rand[r] = lam * weights[:, None] * t / t.sum(axis=1, keepdims=True)
        inits.append(ReferenceDistribution(tables=rand))

    solutions = []
    trajectories = []
    for m in inits[: max(starts, 1)]:
        residuals = []
        converged = False
        eta = InclusiveValueFn(table=np.zeros((k, ns)))
        for it in range(1, max_outer + 1):
            eta, _ = solve_inclusive_value(m, model, tol=eta_tol)
            m_new = psi1_apply(m, eta, model, neighborhood_budget=neighborhood_budget)
            res = m_new.sup_distance(m) / (1.0 + lam)
            residuals.append(res)
            blended = {
                r: (1.0 - damping) * m.tables[r] + damping * m_new.tables[r]
                for r in OVERLAP_CLASSES
            }
            m = ReferenceDistribution(tables=blended)
            if res < tol:
                converged = True
                break
        eta, eta_diag = solve_inclusive_value(m, model, tol=eta_tol)
        solutions.append((m, eta, converged, it, residuals))
        trajectories.append(residuals)

    converged_solutions = [s for s in solutions if s[2]]
    if not converged_solutions:
        diag = FixedPointDiagnostics(
            iterations=max_outer,
            final_residual=min(tr[-1] for tr in trajectories),
            contraction_ratios=[],
            converged=False,
            extra={"residual_trajectories": trajectories},
        )
        m, eta, _, it, residuals = solutions[0]
        arrival = arrival_from(m, eta, model)
        return AggregateState(m=m, eta=eta, arrival=arrival, lam=lam), diag

    m, eta, _, iters, residuals = converged_solutions[0]
    spread = 0.0
    for other in converged_solutions[1:]:
        spread = max(spread, m.sup_distance(other[0]) / (1.0 + lam))
    ratios = [
        residuals[i] / residuals[i - 1] for i in range(1, len(residuals)) if residuals[i - 1] > 0
    ]
    arrival = arrival_from(m, eta, model)
    rates = ego_inclusive_rates(model, arrival)
    diag = FixedPointDiagnostics(
        iterations=iters,
        final_residual=residuals[-1],
        contraction_ratios=ratios,
        converged=True,
        extra={
            "multi_start_spread": spread,
            "multiple_fixed_points": bool(spread > 10.0 * tol),
            "eta_vs_ego_gap": float(np.max(np.abs(rates - eta.table))),
            "starts_converged": len(converged_solutions),
        },
    )
    return AggregateState(m=m, eta=eta, arrival=arrival, lam=lam), diag


def limit_moment(state: AggregateState, spec: MomentSpec, theta, mc_budget, rng, model=None):
    """Monte Carlo limit of the normalized moment under the sampling
    representation, with p_n = n^{-k} normalization for k-link events.

    Returns (value vector, standard error vector).  Patterns with more links
    than the event minimum contribute zero in the limit and are skipped.
    """
    if model is None:
        raise DomainError("limit_moment requires the payoff model")
    _require_degree(model, "limit_moment")
    event = spec.event
    d_size = event.d
    counts = event.link_counts()
    k_min = counts[0]
    patterns = [c for c in event.configurations if sum(c) == k_min]

    cap = model.node_stat.cap
    support = np.asarray(model.node_stat.support, dtype=float)
    rates = ego_inclusive_rates(model, state.arrival)
    utab = model.payoff_grid()
    weights = np.asarray(model.type_space.weights)
    vals = np.asarray(model.type_space.values)

    from .graph import pair_order

    pairs = pair_order(range(d_size))
    budget = int(mc_budget)
    xs_idx = rng.choice(len(vals), size=(budget, d_size), p=weights)
    v = rng.standard_exponential((budget, d_size))

    cache = {}
    draws = np.zeros((budget, spec.instrument.q))
    for pattern in patterns:
        patdeg = np.zeros(d_size, dtype=int)
        for bit, (a, b) in zip(pattern, pairs):
            if bit:
                patdeg[a] += 1
                patdeg[b] += 1
        # sample neighborhood link counts per slot (status-quo pmf given v)
        s_val = np.zeros((budget, d_size))
        for slot in range(d_size):
            s_val[:, slot] = _sample_ego_stat(
                rates, xs_idx[:, slot], v[:, slot], patdeg[slot], cap, rng
            )
        w = np.ones(budget)
        if k_min > 0:
            for bit, (a, b) in zip(pattern, pairs):
                if not bit:
                    continue
                sa = np.minimum(s_val[:, a], cap).astype(int)
                sb = np.minimum(s_val[:, b], cap).astype(int)
                u_ab = utab[xs_idx[:, a], xs_idx[:, b], sa, sb]
                u_ba = utab[xs_idx[:, b], xs_idx[:, a], sb, sa]
                w *= v[:, a] * v[:, b] * np.exp(u_ab + u_ba)
        hvals = np.empty((budget, spec.instrument.q))
        # instrument evaluated per attribute tuple (cached on cells)
        flat = [tuple(vals[r] for r in row) for row in xs_idx]
        for i, key in enumerate(flat):
            hvals[i] = _h_sym(spec.instrument, key, theta, cache)
        draws += w[:, None] * hvals
    est = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / math.sqrt(budget)
    return est, se


def _sample_ego_stat(rates, x_idx, v, patdeg, cap, rng):
    """Draw clamp(d + patdeg) where d | v has the status-quo mixed-Poisson pmf."""
    budget = x_idx.shape[0]
    d_max = cap + 30
    ds = np.arange(d_max + 1)
    sig = np.minimum(ds + patdeg, cap)
    out = np.empty(budget)
    # group draws by attribute cell; rates vary only through (x, sigma)
    for a in np.unique(x_idx):
        mask = x_idx == a
        i_d = rates[a][sig]  # (d_max+1,)
        vv = v[mask][:, None]
        with np.errstate(divide="ignore"):
            logp = ds[None, :] * np.log(np.maximum(vv * i_d[None, :], 1e-300)) - vv * i_d[
                None, :
            ] - _log_factorials(d_max)[None, :]
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)
        p /= p.sum(axis=1, keepdims=True)
        cdf = np.cumsum(p, axis=1)
        u = rng.random(mask.sum())[:, None]
        d_draw = (u > cdf).sum(axis=1)
        out[mask] = np.minimum(d_draw + patdeg, cap)
    return out


_LOGFACT_CACHE = {}


def _log_factorials(n):
    got = _LOGFACT_CACHE.get(n)
    if got is None:
        got = np.cumsum(np.log(np.maximum(np.arange(n + 1), 1)))
        _LOGFACT_CACHE[n] = got
    return got


def scalar_closed_form(model: PayoffModel):
    """Independent scalar reduction for a single-type constant-payoff model.

    Solves the stacked pair (reference distribution equation, inclusive value
    equation) by one-dimensional root finding over h, including the support
    cap, and returns (mean degree, inclusive value).  Test oracle for
    solve_joint; deliberately coded through a different route (brentq on the
    scalar residual) than the damped table iteration it checks.
    """
    from scipy.optimize import brentq

    if model.type_space.k != 1:
        raise DomainError("scalar reduction needs a single-type model")
    u = model.payoff(model.type_space.values[0], model.type_space.values[0], 0, 0)
    if not np.allclose(model.payoff_grid(), u):
        raise DomainError("scalar reduction needs a statistic-free payoff")
    cap = model.node_stat.cap
    lam = math.exp(2.0 * model.u_bar)
    w = math.exp(2.0 * u - 2.0 * model.u_bar)

    def count_pmf(rate):
        # ego link counts: geometric weights rate^d/(1+rate)^{d+1}
        d = np.arange(cap + 200)
        logp = d * math.log(rate) - (d + 1) * math.log1p(rate) if rate > 0 else None
        if logp is None:
            pmf = np.zeros(d.size)
            pmf[0] = 1.0
            return pmf
        pmf = np.exp(logp)
        return pmf / pmf.sum()

    def psi2_residual(h):
        pmf = count_pmf(h)
        # class-1 table: s1 = clamp(d+1, cap)
        m1 = np.zeros(cap + 1)
        for d, p in enumerate(pmf):
            m1[min(d + 1, cap)] += lam * p
        rhs = float((np.arange(cap + 1) * m1).sum()) * w / (1.0 + h)
        return rhs - h

    h_star = brentq(psi2_residual, 1e-12, 1e8, xtol=1e-14, rtol=1e-14)
    pmf0 = count_pmf(h_star)
    mean_deg = float(sum(min(d, cap) * p for d, p in enumerate(pmf0)))
    return mean_deg, h_star
