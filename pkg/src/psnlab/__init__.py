"""psnlab: simulation and numerical verification for strategic network
formation under pairwise stability.

Subpackages mirror the pipeline: model (payoffs, shocks, scaling), graph
(networks and statistics), psn (stability engine and oracles), moments
(D-adic moments), aggstate (inclusive values, reference distribution, fixed
points), sampling (Poisson neighborhood representation), experiments (Monte
Carlo verification of the LLN, bias rate and CLT), cli.
"""

from . import aggstate, config, experiments, graph, model, moments, psn, sampling

__all__ = [
    "aggstate",
    "config",
    "experiments",
    "graph",
    "model",
    "moments",
    "psn",
    "sampling",
]

__version__ = "0.1.0"
