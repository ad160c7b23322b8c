"""Structural payoff model, taste-shock families and asymptotic scaling.

The model primitives are deliberately finite: a finite type space for node
attributes, finite supports for the payoff-relevant network statistics, and
one of two admissible shock families (gumbel, exponential).  Everything
downstream (stability checks, moments, fixed points) consumes these
primitives through :class:`PayoffModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "TypeSpace",
    "StatisticSpec",
    "ShockDistribution",
    "ScalingSequence",
    "PayoffModel",
    "scaling",
    "draw_marginal_cost",
    "evaluate_payoff",
    "linear_payoff",
    "table_payoff",
]

_EULER_GAMMA = 0.5772156649015329

STAT_KINDS = ("degree", "composition_share", "transitive_count", "transitive_indicator")
NODE_KINDS = ("degree", "composition_share")
EDGE_KINDS = ("transitive_count", "transitive_indicator")


class DomainError(ValueError):
    """Argument outside the finite grids the model is defined on."""


@dataclass(frozen=True)
class TypeSpace:
    """Finite ordered attribute space with sampling weights."""

    values: tuple
    weights: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        if len(values) != len(set(values)):
            raise DomainError("attribute values must be distinct")
        if len(weights) != len(values):
            raise DomainError("weights/values length mismatch")
        if any(w < 0 for w in weights):
            raise DomainError("weights must be nonnegative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise DomainError("weights must sum to 1 within 1e-12")

    @property
    def k(self):
        return len(self.values)

    def index_of(self, value) -> int:
        for i, v in enumerate(self.values):
            if v == value:
                return i
        raise DomainError(f"attribute {value!r} not in type space")

    def draw_indices(self, n, rng) -> np.ndarray:
        return rng.choice(self.k, size=n, p=np.asarray(self.weights))


@dataclass(frozen=True)
class StatisticSpec:
    """A payoff-relevant network statistic with a finite, capped support.

    kind:
        "degree"               -- number of neighbors, clamped at ``cap``.
        "composition_share"    -- share of neighbors with attribute equal to
                                  ``flag_value``, rounded to a grid with
                                  ``cap`` buckets (0 when isolated).
        "transitive_count"     -- number of common neighbors of a pair,
                                  clamped at ``cap``.
        "transitive_indicator" -- 1 iff the pair has any common neighbor.
    """

    kind: str
    cap: int = 8
    radius: int = 1
    flag_value: float | None = None

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise DomainError(f"unknown statistic kind {self.kind!r}")
        if self.cap < 1:
            raise DomainError("cap must be >= 1")
        if self.radius < 1:
            raise DomainError("radius must be >= 1")
        if self.kind in ("degree", "composition_share") and self.radius != 1:
            raise DomainError(f"{self.kind} statistics have radius 1")
        if self.kind == "transitive_indicator" and self.cap != 1:
            object.__setattr__(self, "cap", 1)

    @property
    def support(self) -> tuple:
        """Ordered finite support of the statistic."""
        if self.kind in ("degree", "transitive_count"):
            return tuple(range(self.cap + 1))
        if self.kind == "transitive_indicator":
            return (0, 1)
        # share grid with cap buckets; exact fractions keep the grid closed
        return tuple(float(Fraction(k, self.cap)) for k in range(self.cap + 1))

    @property
    def size(self) -> int:
        return len(self.support)

    def value_index(self, value) -> int:
        support = self.support
        if self.kind in ("degree", "transitive_count", "transitive_indicator"):
            return int(value)
        # nearest grid point for shares
        return int(round(float(value) * self.cap))

    def clamp(self, raw):
        """Clamp/round a raw statistic onto the declared support."""
        if self.kind in ("degree", "transitive_count"):
            return min(int(raw), self.cap)
        if self.kind == "transitive_indicator":
            return int(bool(raw))
        return float(Fraction(min(max(int(round(float(raw) * self.cap)), 0), self.cap), self.cap))


@dataclass(frozen=True)
class ShockDistribution:
    """Taste-shock family G with density, quantile and auxiliary function.

    Only the gumbel and exponential families are admitted: both have the
    exponential upper tail that makes logit limits exact at rate o(n^{-1/2}).
    The Gaussian family fails that tail condition and is rejected.
    """

    family: str

    def __post_init__(self):
        if self.family not in ("gumbel", "exponential"):
            raise DomainError(
                f"shock family {self.family!r} not admissible (gumbel or exponential only)"
            )

    def cdf(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "gumbel":
            return np.exp(-np.exp(-s))
        return np.where(s > 0, -np.expm1(-np.maximum(s, 0.0)), 0.0)

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "gumbel":
            return np.exp(-s - np.exp(-s))
        return np.where(s > 0, np.exp(-np.maximum(s, 0.0)), 0.0)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise DomainError("quantile argument must lie in (0,1)")
        if self.family == "gumbel":
            return -np.log(-np.log(p))
        return -np.log1p(-p)

    def aux(self, s):
        """a(s) = (1 - G(s)) / g(s); identically 1 for the exponential family."""
        s = np.asarray(s, dtype=float)
        if self.family == "exponential":
            return np.ones_like(s)
        # (e^w - 1) / w with w = exp(-s), stable for small w
        w = np.exp(-s)
        return np.where(w < 1e-8, 1.0 + w / 2.0, np.expm1(w) / np.where(w == 0, 1.0, w))

    def sf_shifted(self, z):
        """P(eps >= z), valid on the whole real line."""
        z = np.asarray(z, dtype=float)
        if self.family == "gumbel":
            return -np.expm1(-np.exp(-z))
        return np.where(z > 0, np.exp(-np.maximum(z, 0.0)), 1.0)

    def draw(self, rng, size=None):
        u = rng.random(size)
        if self.family == "gumbel":
            return -np.log(-np.log(u))
        return -np.log1p(-u)


@dataclass(frozen=True)
class ScalingSequence:
    """Sparse-network scaling at size n: J = [sqrt(n)], b_n, sigma_n."""

    n: int
    j_n: int
    b_n: float
    sigma_n: float


def scaling(n: int, shock: ShockDistribution) -> ScalingSequence:
    """Compute (j_n, b_n, sigma_n) for a network of n nodes.

    j_n = sqrt(n) rounded half-up; b_n = G^{-1}(1 - 1/sqrt(n));
    sigma_n = 1/a(b_n).  For exponential shocks sigma_n = 1 exactly.
    """
    if n < 2:
        raise DomainError("scaling requires n >= 2")
    j_n = int(math.floor(math.sqrt(n) + 0.5))
    b_n = float(shock.ppf(1.0 - 1.0 / math.sqrt(n)))
    sigma_n = float(1.0 / shock.aux(b_n))
    return ScalingSequence(n=n, j_n=j_n, b_n=b_n, sigma_n=sigma_n)


def draw_marginal_cost(scal: ScalingSequence, shock: ShockDistribution, rng, size=None):
    """Draw sigma_n * max of j_n i.i.d. shocks (the marginal cost of a link).

    For the gumbel family the max-stable shortcut sigma*(log J + eps) is
    distributionally exact and used when drawing.
    """
    if shock.family == "gumbel":
        return scal.sigma_n * (math.log(scal.j_n) + shock.draw(rng, size))
    if size is None:
        return scal.sigma_n * shock.draw(rng, scal.j_n).max()
    eps = shock.draw(rng, (int(np.prod(size)) if not np.isscalar(size) else size, scal.j_n))
    return scal.sigma_n * eps.max(axis=-1)


def mc_cdf(scal: ScalingSequence, shock: ShockDistribution, t):
    """CDF of the marginal cost: G(t/sigma)^J."""
    return shock.cdf(np.asarray(t, dtype=float) / scal.sigma_n) ** scal.j_n


def linear_payoff(theta):
    """Linear systematic utility: t0 + t1*x + t2*x' + t3*x*x' + t4*s + t5*s' + t6*t.

    The statistic slots take the raw statistic values (for degree statistics
    the degree itself).
    """
    theta = tuple(float(t) for t in theta)
    if len(theta) != 7:
        raise DomainError("linear payoff takes a 7-vector theta")

    def u(x, xp, s, sp, t):
        return (
            theta[0]
            + theta[1] * x
            + theta[2] * xp
            + theta[3] * x * xp
            + theta[4] * s
            + theta[5] * sp
            + theta[6] * t
        )

    return u


def table_payoff(table, type_space, stat_spec, t_support=(0,)):
    """Payoff looked up from a dense grid table U[xi, xj, si, sj, ti]."""
    arr = np.asarray(table, dtype=float)

    def u(x, xp, s, sp, t):
        i = type_space.index_of(x)
        j = type_space.index_of(xp)
        si = stat_spec.value_index(s)
        sj = stat_spec.value_index(sp)
        ti = t_support.index(t) if len(t_support) > 1 else 0
        return float(arr[i, j, si, sj, ti] if arr.ndim == 5 else arr[i, j, si, sj])

    return u


@dataclass(frozen=True)
class PayoffModel:
    """Systematic utility U*(x,x';s,s',t), shock family and statistic grids.

    u_bar is the exhaustive maximum of the systematic part over the finite
    (x, x', s, s') grid at t = t_default; it is recomputed on construction,
    so reparametrize with :meth:`with_theta` rather than by mutation.
    """

    type_space: TypeSpace
    node_stat: StatisticSpec
    shock: ShockDistribution
    theta: tuple
    payoff_form: str = "linear"
    edge_stat: StatisticSpec | None = None
    t_default: float = 0.0
    payoff_table_values: tuple | None = None
    u_bar: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.node_stat.kind not in NODE_KINDS:
            raise DomainError("node_stat must be a node-level kind")
        if self.edge_stat is not None and self.edge_stat.kind not in EDGE_KINDS:
            raise DomainError("edge_stat must be an edge-level kind")
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if self.payoff_form == "linear":
            object.__setattr__(self, "_u", linear_payoff(self.theta))
        elif self.payoff_form == "table":
            if self.payoff_table_values is None:
                raise DomainError("table payoff requires payoff_table_values")
            arr = np.asarray(self.payoff_table_values, dtype=float)
            object.__setattr__(
                self, "_u", table_payoff(arr, self.type_space, self.node_stat)
            )
        else:
            raise DomainError(f"unknown payoff form {self.payoff_form!r}")
        object.__setattr__(self, "u_bar", float(self.payoff_grid().max()))

    def with_theta(self, theta) -> "PayoffModel":
        return PayoffModel(
            type_space=self.type_space,
            node_stat=self.node_stat,
            shock=self.shock,
            theta=tuple(theta),
            payoff_form=self.payoff_form,
            edge_stat=self.edge_stat,
            t_default=self.t_default,
            payoff_table_values=self.payoff_table_values,
        )

    def payoff(self, x, xp, s, sp, t=None):
        """Systematic part of the marginal benefit of a link; pure."""
        if t is None:
            t = self.t_default
        self._check_args(x, xp, s, sp, t)
        return float(self._u(x, xp, s, sp, t))

    def payoff_grid(self, t=None) -> np.ndarray:
        """Dense U*[xi, xj, si, sj] grid at a fixed edge statistic (default t0)."""
        if t is None:
            t = self.t_default
        if t == self.t_default and getattr(self, "_grid_cache", None) is not None:
            return self._grid_cache
        xs = np.asarray(self.type_space.values)
        ss = np.asarray(self.node_stat.support, dtype=float)
        xg, xpg, sg, spg = np.meshgrid(xs, xs, ss, ss, indexing="ij")
        if self.payoff_form == "linear":
            th = self.theta
            grid = (
                th[0]
                + th[1] * xg
                + th[2] * xpg
                + th[3] * xg * xpg
                + th[4] * sg
                + th[5] * spg
                + th[6] * float(t)
            )
        else:
            grid = np.empty(xg.shape)
            for idx in np.ndindex(*xg.shape):
                grid[idx] = self._u(xg[idx], xpg[idx], sg[idx], spg[idx], t)
        if t == self.t_default:
            grid.setflags(write=False)
            object.__setattr__(self, "_grid_cache", grid)
        return grid

    def _check_args(self, x, xp, s, sp, t):
        self.type_space.index_of(x)
        self.type_space.index_of(xp)
        sup = self.node_stat.support
        for v in (s, sp):
            if self.node_stat.kind == "composition_share":
                if not any(abs(float(v) - g) < 1e-9 for g in sup):
                    raise DomainError(f"statistic {v!r} not on the share grid")
            elif v not in sup:
                raise DomainError(f"statistic {v!r} outside the declared support")
        if self.edge_stat is not None:
            if t not in self.edge_stat.support:
                raise DomainError(f"edge statistic {t!r} outside the declared support")

    @property
    def t_support(self):
        return self.edge_stat.support if self.edge_stat is not None else (self.t_default,)


def evaluate_payoff(model: PayoffModel, x, xp, s, sp, t=None):
    """Free-function form of :meth:`PayoffModel.payoff`."""
    return model.payoff(x, xp, s, sp, t)
