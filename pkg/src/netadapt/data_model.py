"""Linear regression data model ``d_k(i) = u_{k,i} w° + v_k(i)`` and its sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REGRESSOR_DISTS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class AgentEnsemble:
    """Second-order statistics of every agent.

    Attributes
    ----------
    dim : int
        Parameter length M.
    truth : ndarray, shape (M,)
        The unknown vector w°.
    covariances : ndarray, shape (N, M, M)
        Regressor covariances R_{u,k}.
    noise_vars : ndarray, shape (N,)
        Measurement noise variances.
    regressor_dist : str
        ``"gaussian"`` draws ``u = g F`` with standard normal g.
        ``"rademacher"`` draws g with independent +-1 entries instead, which has
        the same covariance but bounded fourth moments (for M=1, ``u**2 == R``).
    factors : ndarray, shape (N, M, M)
        ``F_k = sqrt(Lambda_k) Q_k^T`` from ``R_{u,k} = Q Lambda Q^T``, so that
        ``F_k^T F_k = R_{u,k}`` even for singular covariances.
    """

    dim: int
    truth: np.ndarray
    covariances: np.ndarray
    noise_vars: np.ndarray
    regressor_dist: str
    factors: np.ndarray

    @property
    def num_agents(self) -> int:
        return self.covariances.shape[0]

    @property
    def r_du(self) -> np.ndarray:
        """Cross-covariances ``r_{du,k} = R_{u,k} w°``, shape (N, M)."""
        return self.covariances @ self.truth

    @property
    def h_block(self) -> np.ndarray:
        """NM x NM block diagonal of the covariances."""
        N, M = self.num_agents, self.dim
        H = np.zeros((N * M, N * M))
        for k in range(N):
            H[k * M : (k + 1) * M, k * M : (k + 1) * M] = self.covariances[k]
        return H

    @property
    def r_z(self) -> np.ndarray:
        """Gradient-noise covariance ``blockdiag{sigma_k^2 R_{u,k}}``."""
        N, M = self.num_agents, self.dim
        Rz = np.zeros((N * M, N * M))
        for k in range(N):
            Rz[k * M : (k + 1) * M, k * M : (k + 1) * M] = self.noise_vars[k] * self.covariances[k]
        return Rz

    def common_covariance(self, atol: float = 1e-12) -> np.ndarray | None:
        """The shared R_u if every agent has the same covariance, else None."""
        R0 = self.covariances[0]
        if np.allclose(self.covariances, R0, atol=atol, rtol=0):
            return R0
        return None

    def optimality_residual(self) -> np.ndarray:
        return self.covariances @ self.truth - self.r_du


def _psd_factor(R: np.ndarray, tol: float) -> np.ndarray:
    lam, Q = np.linalg.eigh(R)
    if lam[0] < -tol:
        raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    lam = np.clip(lam, 0.0, None)
    return np.sqrt(lam)[:, None] * Q.T


def make_ensemble(
    dim: int,
    truth,
    covariances,
    noise_vars,
    *,
    regressor_dist: str = "gaussian",
    allow_singular_sum: bool = False,
) -> AgentEnsemble:
    """Validate moments and build an :class:`AgentEnsemble`.

    Raises ``ValueError`` for non-PSD covariances, negative noise variances,
    inconsistent shapes, or a singular covariance sum (unless
    ``allow_singular_sum``).
    """
    M = int(dim)
    w = np.asarray(truth, dtype=float).reshape(-1)
    R = np.asarray(covariances, dtype=float)
    if R.ndim == 1 and M == 1:
        R = R.reshape(-1, 1, 1)
    sig = np.asarray(noise_vars, dtype=float).reshape(-1)
    if w.shape != (M,):
        raise ValueError(f"truth must have length {M}, got {w.shape}")
    if R.ndim != 3 or R.shape[1:] != (M, M):
        raise ValueError(f"covariances must have shape (N, {M}, {M}), got {R.shape}")
    if sig.shape != (R.shape[0],):
        raise ValueError("need one noise variance per agent")
    if np.any(sig < 0):
        raise ValueError("noise variances must be nonnegative")
    if regressor_dist not in REGRESSOR_DISTS:
        raise ValueError(f"regressor_dist must be one of {REGRESSOR_DISTS}")

    factors = np.empty_like(R)
    for k, Rk in enumerate(R):
        if not np.allclose(Rk, Rk.T, atol=1e-10, rtol=0):
            raise ValueError(f"covariance of agent {k + 1} is not symmetric")
        factors[k] = _psd_factor(0.5 * (Rk + Rk.T), tol=1e-10)

    if not allow_singular_sum:
        total = R.sum(axis=0)
        lam_min = np.linalg.eigvalsh(total)[0]
        if lam_min <= 1e-10 * max(1.0, np.abs(total).max()):
            raise ValueError("sum of covariances is singular; w° is not identifiable")

    return AgentEnsemble(
        dim=M, truth=w, covariances=R, noise_vars=sig, regressor_dist=regressor_dist, factors=factors
    )


@dataclass(frozen=True)
class SampleBatch:
    """One time instant of data for every agent.

    ``regressors`` has shape (..., N, M) and ``observations`` (..., N); leading
    axes index time steps when several instants are drawn at once.
    """

    regressors: np.ndarray
    observations: np.ndarray


def draw_block(ensemble: AgentEnsemble, rng: np.random.Generator, steps: int) -> SampleBatch:
    """Draw ``steps`` consecutive independent instants in one call."""
    N, M = ensemble.num_agents, ensemble.dim
    if ensemble.regressor_dist == "gaussian":
        g = rng.standard_normal((steps, N, M))
    else:
        g = 2.0 * rng.integers(0, 2, size=(steps, N, M)).astype(float) - 1.0
    u = np.einsum("tnj,njm->tnm", g, ensemble.factors)
    v = rng.standard_normal((steps, N)) * np.sqrt(ensemble.noise_vars)
    d = u @ ensemble.truth + v
    return SampleBatch(regressors=u, observations=d)


def sample_step(ensemble: AgentEnsemble, rng: np.random.Generator) -> SampleBatch:
    """One instant: ``u_{k,i}`` with covariance R_{u,k}, ``d_k(i)`` from the linear model."""
    block = draw_block(ensemble, rng, 1)
    return SampleBatch(regressors=block.regressors[0], observations=block.observations[0])


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Generator owned by one Monte Carlo trial, keyed on (seed, trial_index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index)]))


def init_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Generator for a trial's random starting point, independent of its data stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index), 1]))


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal(dim)
    return w / np.linalg.norm(w)
