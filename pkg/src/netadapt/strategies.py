"""One synchronous round of each distributed strategy.

Every step accepts arrays with arbitrary leading batch axes: ``w`` is
(..., N, M), ``lam`` is (..., E, M), regressors (..., N, M) and observations
(..., N). All agents read iterates from round i-1 and the step returns fresh
arrays for round i.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .data_model import SampleBatch
from .graph import CombinationMatrix, NetworkTopology

KINDS = ("noncoop", "diffusion_atc", "consensus", "primal_dual")


def resolve_linked_step(mu: float, theta: float, *, allow_large_step: bool = False) -> float:
    """Regularizer tied to the step size, ``eta = mu**(-1/theta)``."""
    if theta <= 1:
        raise ValueError("theta must exceed 1")
    if mu <= 0:
        raise ValueError("step size must be positive")
    if mu >= 1:
        if not allow_large_step:
            raise ValueError("linked step-size needs mu < 1 (eta would not exceed 1)")
        warnings.warn("mu >= 1: linked eta <= 1 is outside the large-eta regime", stacklevel=2)
    return float(mu ** (-1.0 / theta))


@dataclass(frozen=True)
class AlgorithmConfig:
    """Which strategy to run and with what parameters.

    For ``primal_dual`` an ``eta`` of 0 gives the Arrow-Hurwicz method. When
    ``linked_theta`` is set, ``eta`` is overwritten by ``mu**(-1/theta)``.
    """

    kind: str
    step_size: float
    eta: float = 0.0
    linked_theta: float | None = None
    combination: CombinationMatrix | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if not self.step_size > 0:
            raise ValueError("step size must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.linked_theta is not None:
            if self.kind != "primal_dual":
                raise ValueError("linked_theta only applies to primal_dual")
            object.__setattr__(self, "eta", resolve_linked_step(self.step_size, self.linked_theta))
        if self.kind in ("diffusion_atc", "consensus") and self.combination is None:
            raise ValueError(f"{self.kind} needs a combination matrix")
        if self.label is None:
            object.__setattr__(self, "label", default_label(self))

    @property
    def is_ah(self) -> bool:
        return self.kind == "primal_dual" and self.eta == 0

    def with_step(self, mu: float) -> "AlgorithmConfig":
        return replace(self, step_size=mu)


def default_label(config: AlgorithmConfig) -> str:
    if config.kind != "primal_dual":
        return {"diffusion_atc": "diffusion"}.get(config.kind, config.kind)
    if config.linked_theta is not None:
        return f"al_linked_theta{config.linked_theta:g}"
    if config.eta == 0:
        return "ah"
    return f"al_eta{config.eta:g}"


@dataclass(frozen=True)
class AlgState:
    """Primal iterates (..., N, M) and, for primal-dual runs, edge duals (..., E, M)."""

    primal: np.ndarray
    dual: np.ndarray | None = None

    def is_finite(self) -> np.ndarray:
        ok = np.isfinite(self.primal).all(axis=(-2, -1))
        if self.dual is not None and self.dual.shape[-2] > 0:
            ok &= np.isfinite(self.dual).all(axis=(-2, -1))
        return ok


def init_state(
    config: AlgorithmConfig, topology: NetworkTopology, dim: int, batch_shape: tuple[int, ...] = ()
) -> AlgState:
    """All-zero primal (and dual) iterates."""
    N = topology.num_nodes
    primal = np.zeros(batch_shape + (N, dim))
    if config.kind != "primal_dual":
        return AlgState(primal=primal)
    if N < 2 or topology.num_edges == 0:
        raise ValueError("primal-dual strategies need at least one edge")
    return AlgState(primal=primal, dual=np.zeros(batch_shape + (topology.num_edges, dim)))


def _gradient(w: np.ndarray, batch: SampleBatch) -> np.ndarray:
    """Instantaneous LMS direction ``u^T (d - u w)`` evaluated at ``w``."""
    u = batch.regressors
    err = batch.observations - np.einsum("...nm,...nm->...n", u, w)
    return u * err[..., None]


def _combine(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out_k = sum_l a_{lk} x_l``."""
    return np.einsum("lk,...lm->...km", weights, x)


def noncoop_step(state: AlgState, batch: SampleBatch, mu: float) -> AlgState:
    return AlgState(primal=state.primal + mu * _gradient(state.primal, batch), dual=state.dual)


def diffusion_step(
    state: AlgState, batch: SampleBatch, combination: CombinationMatrix, mu: float
) -> AlgState:
    """Adapt-then-combine: local LMS update, then neighborhood averaging."""
    psi = state.primal + mu * _gradient(state.primal, batch)
    return AlgState(primal=_combine(combination.weights, psi), dual=state.dual)


def consensus_step(
    state: AlgState, batch: SampleBatch, combination: CombinationMatrix, mu: float
) -> AlgState:
    """Average the neighbors, then add a gradient taken at the agent's own old iterate."""
    phi = _combine(combination.weights, state.primal)
    return AlgState(primal=phi + mu * _gradient(state.primal, batch), dual=state.dual)


def primal_dual_step(
    state: AlgState, batch: SampleBatch, topology: NetworkTopology, mu: float, eta: float
) -> AlgState:
    """Distributed augmented Lagrangian round (Arrow-Hurwicz when ``eta == 0``).

    The dual of edge (k, l), k < l, moves along ``w_k - w_l``; the primal
    correction uses the old duals and the Laplacian-weighted old neighbors,
    and the data gradient is taken at the agent's old iterate.
    """
    w, lam = state.primal, state.dual
    C = topology.incidence
    psi = w - mu * np.einsum("ek,...em->...km", C, lam)
    if eta != 0:
        psi = psi - (mu * eta) * np.einsum("kl,...lm->...km", topology.laplacian, w)
    w_new = psi + mu * _gradient(w, batch)
    lam_new = lam + mu * np.einsum("ek,...km->...em", C, w)
    return AlgState(primal=w_new, dual=lam_new)


def step(
    config: AlgorithmConfig, state: AlgState, batch: SampleBatch, topology: NetworkTopology
) -> AlgState:
    mu = config.step_size
    if config.kind == "noncoop":
        return noncoop_step(state, batch, mu)
    if config.kind == "diffusion_atc":
        return diffusion_step(state, batch, config.combination, mu)
    if config.kind == "consensus":
        return consensus_step(state, batch, config.combination, mu)
    return primal_dual_step(state, batch, topology, mu, config.eta)
