"""Poisson network-neighborhood sampling representation.

Two layers:

* the literal representation (draw_neighborhood): member counts are Poisson
  in the class-total intensity, members carry potential values per overlap
  class, and fresh shock draws are attached;

* a finite-n calibrated version (FiniteState) in which the marginal-cost
  distribution, J_n and sigma_n enter exactly and the statistic profile of a
  potential partner is tracked *jointly with its marginal cost* (quadrature
  nodes), preserving the cost/acceptance correlation to the order the
  representation itself is valid, O(1/n).  Event probabilities are
  Rao-Blackwellized over everything except the polyad's own attribute and
  marginal-cost draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import pair_order
from .model import DomainError, PayoffModel, ScalingSequence, scaling
from .moments import MomentSpec, SubnetworkEvent

__all__ = [
    "Neighborhood",
    "draw_neighborhood",
    "simulate_event_prob",
    "FiniteState",
    "finite_state",
    "finite_event_prob",
]

Q_MAX = 64  # neighborhood size truncation; Poisson tail beyond this is ~0 at desk scale


@dataclass
class Neighborhood:
    """A drawn neighborhood: member cells and their attached shock draws."""

    members: list  # (x_index, s_value, overlap_class)
    eps_out: np.ndarray  # ego -> member shock
    eps_in: np.ndarray  # member -> ego shock
    member_mc: np.ndarray


def draw_neighborhood(m, scal: ScalingSequence, rng, model: PayoffModel, r_class=1):
    """Draw one Poisson neighborhood from the class-r intensity table of m."""
    from .model import draw_marginal_cost

    table = m.table(r_class)
    total = float(table.sum())
    count = min(int(rng.poisson(total)), Q_MAX) if total > 0 else 0
    members = []
    if count > 0:
        flat = (table / total).ravel()
        cells = rng.choice(flat.size, size=count, p=flat)
        k_cols = table.shape[1]
        support = model.node_stat.support
        for c in cells:
            members.append((int(c // k_cols), support[int(c % k_cols)], int(r_class)))
    eps_out = model.shock.draw(rng, count) if count else np.empty(0)
    eps_in = model.shock.draw(rng, count) if count else np.empty(0)
    mc = (
        np.asarray(draw_marginal_cost(scal, model.shock, rng, size=count), dtype=float)
        if count
        else np.empty(0)
    )
    return Neighborhood(members=members, eps_out=eps_out, eps_in=eps_in, member_mc=mc)


# --- finite-n calibrated machinery ----------------------------------------


@dataclass
class FiniteState:
    """Finite-n partner profile P(s | x, mc node) on a cost quadrature grid."""

    n: int
    scal: ScalingSequence
    profile: np.ndarray  # (K, Q, S): statistic pmf given attribute and cost node
    mc_nodes: np.ndarray  # (Q,)
    mc_weights: np.ndarray  # (Q,)


def _mc_quadrature(model, scal, points=160):
    """Gauss-Legendre nodes for expectations over MC = sigma * max of J shocks.

    Substituting z = G(m/sigma)^J maps the integral to the unit cube:
    m(z) = sigma * ppf(z^{1/J}).
    """
    z, w = np.polynomial.legendre.leggauss(points)
    z = 0.5 * (z + 1.0)
    w = 0.5 * w
    mc = scal.sigma_n * model.shock.ppf(np.clip(z ** (1.0 / scal.j_n), 1e-15, 1 - 1e-15))
    return mc, w


def _accept_prob(model, scal, u, mc):
    """P(u + sigma * eps >= mc) for a raw shock eps."""
    return model.shock.sf_shifted((np.asarray(mc, dtype=float) - u) / scal.sigma_n)


def _partner_response_tables(model, scal, profile, mc_nodes, mc_w):
    """For each ego attribute a: B_a[x', s0', sigma] combining the partner's
    statistic law at each cost node with its acceptance probability."""
    utab = model.payoff_grid()
    cap = model.node_stat.cap
    k = model.type_space.k
    s1 = np.minimum(np.arange(cap + 1) + 1, cap)
    tables = np.zeros((k, k, cap + 1, cap + 1))
    for a in range(k):
        for b in range(k):
            u_ba = utab[b, a][s1, :]  # (s0', sigma): partner's utility from ego
            acc = _accept_prob(model, scal, u_ba[None, :, :], mc_nodes[:, None, None])
            tables[a, b] = np.einsum("q,qst,qs->st", mc_w, acc, profile[b])
    return tables


def _ego_rates(model, scal, ego_attr, b_table, mcs, n_others):
    """Linked-partner Poisson rate by (ego cost, own-stat candidate sigma).

    rate(mc, sigma) = n_others * sum_{x', s0'} P_X(x') *
        P(ego accepts (x', s1') | mc) * B[x', s0', sigma].
    """
    utab = model.payoff_grid()
    cap = model.node_stat.cap
    weights = np.asarray(model.type_space.weights)
    s1 = np.minimum(np.arange(cap + 1) + 1, cap)
    u_fwd = utab[ego_attr][:, :, s1]  # (x', sigma, s0')
    mcs = np.asarray(mcs, dtype=float)
    acc = _accept_prob(model, scal, u_fwd[None, :, :, :], mcs[:, None, None, None])
    # (draws, x', sigma, s0') x (x', s0', sigma) -> (draws, sigma)
    return n_others * np.einsum("qbts,bst,b->qt", acc, b_table, weights)


def _count_pmf(rates, pin, cap):
    """Status-quo Poisson pmf of the clamped statistic, per rate row."""
    q = rates.shape[0]
    d_max = cap + 30
    ds = np.arange(d_max + 1)
    sig = np.minimum(ds + pin, cap)
    lam = rates[:, sig]
    with np.errstate(divide="ignore"):
        logp = ds[None, :] * np.log(np.maximum(lam, 1e-300)) - lam - _logfact(d_max)[None, :]
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=1, keepdims=True)
    out = np.zeros((q, cap + 1))
    for d in range(d_max + 1):
        out[:, min(d + pin, cap)] += p[:, d]
    return out


_LOGFACT = {}


def _logfact(n):
    got = _LOGFACT.get(n)
    if got is None:
        got = np.cumsum(np.log(np.maximum(np.arange(n + 1), 1)))
        _LOGFACT[n] = got
    return got


def finite_state(model: PayoffModel, n: int, tol=1e-12, max_iter=300) -> FiniteState:
    """Solve the finite-n partner-profile recursion to its fixed point."""
    if model.node_stat.kind != "degree" or model.edge_stat is not None:
        raise DomainError("finite_state supports degree-kind node statistics only")
    scal = scaling(n, model.shock)
    cap = model.node_stat.cap
    k = model.type_space.k
    mc_nodes, mc_w = _mc_quadrature(model, scal)
    profile = np.ones((k, mc_nodes.size, cap + 1)) / (cap + 1)
    for _ in range(max_iter):
        b_tables = _partner_response_tables(model, scal, profile, mc_nodes, mc_w)
        new = np.empty_like(profile)
        for a in range(k):
            rates = _ego_rates(model, scal, a, b_tables[a], mc_nodes, n - 1)
            new[a] = _count_pmf(rates, pin=0, cap=cap)
        delta = float(np.max(np.abs(new - profile)))
        profile = new
        if delta < tol:
            break
    return FiniteState(n=n, scal=scal, profile=profile, mc_nodes=mc_nodes, mc_weights=mc_w)


def finite_event_prob(
    state: FiniteState, model: PayoffModel, event: SubnetworkEvent, mc_budget, rng,
    chunk=20_000,
):
    """Representation probability of a polyad subnetwork event at finite n.

    Monte Carlo over the polyad's attribute and marginal-cost draws only; the
    partner counts and within-polyad link indicators are integrated out
    analytically conditional on those draws.  Processes draws in chunks to
    bound the (draws x statistic-grid) working set.
    """
    d_size = event.d
    cap = model.node_stat.cap
    utab = model.payoff_grid()
    k = model.type_space.k
    weights = np.asarray(model.type_space.weights)
    scal = state.scal
    pairs = pair_order(range(d_size))
    budget = int(mc_budget)

    b_tables = _partner_response_tables(model, scal, state.profile, state.mc_nodes, state.mc_weights)
    patterns = []
    for pattern in event.configurations:
        patdeg = np.zeros(d_size, dtype=int)
        for bit, (a, b) in zip(pattern, pairs):
            if bit:
                patdeg[a] += 1
                patdeg[b] += 1
        patterns.append((pattern, patdeg))

    acc_sum = 0.0
    acc_sq = 0.0
    done = 0
    while done < budget:
        m = min(chunk, budget - done)
        xs = rng.choice(k, size=(m, d_size), p=weights)
        z = rng.random((m, d_size))
        mcs = scal.sigma_n * model.shock.ppf(np.clip(z ** (1.0 / scal.j_n), 1e-15, 1 - 1e-15))
        total = np.zeros(m)
        for pattern, patdeg in patterns:
            slot_pmf = np.zeros((m, d_size, cap + 1))
            for slot in range(d_size):
                for a in range(k):
                    rows = np.flatnonzero(xs[:, slot] == a)
                    if rows.size == 0:
                        continue
                    rates = _ego_rates(
                        model, scal, a, b_tables[a], mcs[rows, slot], state.n - d_size
                    )
                    slot_pmf[rows, slot] = _count_pmf(rates, pin=patdeg[slot], cap=cap)
            total += _pattern_prob_by_slots(
                model, scal, utab, xs, mcs, slot_pmf, pattern, pairs, cap
            )
        acc_sum += float(total.sum())
        acc_sq += float((total * total).sum())
        done += m
    est = acc_sum / budget
    var = max(acc_sq / budget - est * est, 0.0)
    se = math.sqrt(var / budget)
    return est, se


def _pattern_prob_by_slots(model, scal, utab, xs, mcs, slot_pmf, pattern, pairs, cap):
    """P(exact pattern | polyad costs, attributes, slot statistic pmfs).

    Sums the joint slot-statistic grid; grid size is (cap+1)^D with D <= 3 in
    the shipped experiments.
    """
    budget, d_size = xs.shape
    mesh = np.meshgrid(*([np.arange(cap + 1)] * d_size), indexing="ij")
    flat = [g.ravel() for g in mesh]
    ncomb = flat[0].size

    prob = np.ones((budget, ncomb))
    for slot in range(d_size):
        prob *= slot_pmf[:, slot, flat[slot]]
    for bit, (a, b) in zip(pattern, pairs):
        sa, sb = flat[a], flat[b]
        u_ab = utab[xs[:, a][:, None], xs[:, b][:, None], sa[None, :], sb[None, :]]
        u_ba = utab[xs[:, b][:, None], xs[:, a][:, None], sb[None, :], sa[None, :]]
        p_link = _accept_prob(model, scal, u_ab, mcs[:, a][:, None]) * _accept_prob(
            model, scal, u_ba, mcs[:, b][:, None]
        )
        prob *= p_link if bit else (1.0 - p_link)
    return prob.sum(axis=1)


def simulate_event_prob(state, spec: MomentSpec, x_cell, scal, mc_budget, rng, model=None):
    """Monte Carlo event probability under the sampling representation.

    ``state`` may be a FiniteState (used by the gap experiment) or None, in
    which case the finite-n state is solved for scal.n first.  Events are
    polyad subnetwork events (structurally admissible by construction);
    x_cell, when given, fixes the polyad attribute indices.
    """
    if model is None:
        raise DomainError("simulate_event_prob requires the payoff model")
    fstate = state if isinstance(state, FiniteState) else finite_state(model, scal.n)
    event = spec.event
    if x_cell is None:
        return finite_event_prob(fstate, model, event, mc_budget, rng)

    cap = model.node_stat.cap
    utab = model.payoff_grid()
    d_size = event.d
    budget = int(mc_budget)
    xs = np.tile(np.asarray(x_cell, dtype=int), (budget, 1))
    z = rng.random((budget, d_size))
    mcs = fstate.scal.sigma_n * model.shock.ppf(
        np.clip(z ** (1.0 / fstate.scal.j_n), 1e-15, 1 - 1e-15)
    )
    b_tables = _partner_response_tables(
        model, fstate.scal, fstate.profile, fstate.mc_nodes, fstate.mc_weights
    )
    pairs = pair_order(range(d_size))
    total = np.zeros(budget)
    for pattern in event.configurations:
        patdeg = np.zeros(d_size, dtype=int)
        for bit, (a, b) in zip(pattern, pairs):
            if bit:
                patdeg[a] += 1
                patdeg[b] += 1
        slot_pmf = np.zeros((budget, d_size, cap + 1))
        for slot in range(d_size):
            a = int(x_cell[slot])
            rates = _ego_rates(
                model, fstate.scal, a, b_tables[a], mcs[:, slot], fstate.n - d_size
            )
            slot_pmf[:, slot] = _count_pmf(rates, pin=patdeg[slot], cap=cap)
        total += _pattern_prob_by_slots(
            model, fstate.scal, utab, xs, mcs, slot_pmf, pattern, pairs, cap
        )
    est = float(total.mean())
    se = float(total.std(ddof=1) / math.sqrt(budget))
    return est, se
