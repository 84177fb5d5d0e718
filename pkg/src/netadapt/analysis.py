"""Mean and mean-square error dynamics, stability bounds and MSD expressions.

Coordinates of the primal-dual error vector follow the SVD split of the
incidence matrix: ``[w1' (N-1)M | w2' M | lam1' (N-1)M]`` where ``w' = V^T w~``
and ``lam1'`` is the non-redundant part of ``U^T lam~``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data_model import AgentEnsemble
from .graph import NetworkTopology, SpectralSplit, largest_laplacian_eigenvalue, spectral_split
from .strategies import AlgorithmConfig

HURWITZ_TOL = 1e-12


# ---------------------------------------------------------------------------
# block vectorization


def _check_blocks(shape, block_size):
    if block_size < 1 or shape[0] % block_size or shape[1] % block_size:
        raise ValueError(f"shape {shape} is not divisible into {block_size}x{block_size} blocks")


def bvec(X: np.ndarray, block_size: int) -> np.ndarray:
    """Block vectorization.

    Each ``block_size`` square block is vectorized column-wise; blocks are
    stacked going down each block column, block columns left to right.
    """
    X = np.asarray(X)
    _check_blocks(X.shape, block_size)
    m = block_size
    p, q = X.shape[0] // m, X.shape[1] // m
    # (p, m, q, m) -> (q, p, col, row)
    blocks = X.reshape(p, m, q, m).transpose(2, 0, 3, 1)
    return blocks.reshape(-1)


def unbvec(x: np.ndarray, shape: tuple[int, int], block_size: int) -> np.ndarray:
    _check_blocks(shape, block_size)
    m = block_size
    p, q = shape[0] // m, shape[1] // m
    return np.asarray(x).reshape(q, p, m, m).transpose(1, 3, 0, 2).reshape(shape)


def block_kron(A: np.ndarray, B: np.ndarray, block_size: int) -> np.ndarray:
    """Tracy-Singh product of two matrices partitioned into square blocks.

    Block (i, j) of A pairs with block (k, l) of B as ``A_ij kron B_kl``, which
    gives ``bvec(A X B) = block_kron(B.T, A) @ bvec(X)``.
    """
    A, B = np.asarray(A), np.asarray(B)
    _check_blocks(A.shape, block_size)
    _check_blocks(B.shape, block_size)
    m = block_size
    pa, qa = A.shape[0] // m, A.shape[1] // m
    pb, qb = B.shape[0] // m, B.shape[1] // m
    Ab = A.reshape(pa, m, qa, m)
    Bb = B.reshape(pb, m, qb, m)
    # out[(i,k),(a,c)] x [(j,l),(b,d)] = A[i,a,j,b] * B[k,c,l,d]
    out = np.einsum("iajb,kcld->ikacjlbd", Ab, Bb)
    return out.reshape(pa * pb * m * m, qa * qb * m * m)


# ---------------------------------------------------------------------------
# dynamics


@dataclass(frozen=True)
class DynamicsMatrices:
    """Mean and second-moment matrices of the primal-dual error recursion."""

    h_block: np.ndarray
    r_prime: np.ndarray
    b_prime: np.ndarray
    r_z: np.ndarray
    r_h: np.ndarray
    schur_z: np.ndarray | None
    num_nodes: int
    dim: int
    mu: float
    eta: float

    @property
    def size(self) -> int:
        return self.r_prime.shape[0]

    def phi(self) -> np.ndarray:
        """Selector of the primal coordinates (network MSD weighting)."""
        NM = self.num_nodes * self.dim
        Phi = np.zeros((self.size, self.size))
        Phi[:NM, :NM] = np.eye(NM)
        return Phi


def lifted_factors(split: SpectralSplit, dim: int):
    I = np.eye(dim)
    return np.kron(split.v2, I), np.kron(split.v0, I), np.kron(split.s2, I)


def build_dynamics(ensemble: AgentEnsemble, split: SpectralSplit, eta: float, mu: float) -> DynamicsMatrices:
    """Assemble R', B' = I - mu R' and the noise moment R_h."""
    N, M = ensemble.num_agents, ensemble.dim
    if split.num_nodes != N:
        raise ValueError("topology and ensemble disagree on N")
    H = ensemble.h_block
    V2, V0, S2 = lifted_factors(split, M)
    K = (N - 1) * M
    NM = N * M
    D = (2 * N - 1) * M

    Rp = np.zeros((D, D))
    Rp[:K, :K] = V2.T @ H @ V2 + eta * (S2.T @ S2)
    Rp[:K, K:NM] = V2.T @ H @ V0
    Rp[K:NM, :K] = V0.T @ H @ V2
    Rp[K:NM, K:NM] = V0.T @ H @ V0
    Rp[:K, NM:] = S2.T
    Rp[NM:, :K] = -S2

    Rz = ensemble.r_z
    V = np.hstack([V2, V0])
    Rh = np.zeros((D, D))
    Rh[:NM, :NM] = V.T @ Rz @ V

    Rbar = Rp[K:NM, K:NM]
    schur = None
    if np.linalg.eigvalsh(Rbar)[0] > 1e-12:
        cross = Rp[:K, K:NM]
        schur = V2.T @ H @ V2 - cross @ np.linalg.solve(Rbar, cross.T)
        schur = 0.5 * (schur + schur.T)

    return DynamicsMatrices(
        h_block=H,
        r_prime=Rp,
        b_prime=np.eye(D) - mu * Rp,
        r_z=Rz,
        r_h=Rh,
        schur_z=schur,
        num_nodes=N,
        dim=M,
        mu=float(mu),
        eta=float(eta),
    )


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def hurwitz_class(matrix: np.ndarray, tol: float = HURWITZ_TOL) -> str:
    """``"stable"``, ``"marginal"`` (some real part within ``tol`` of 0) or ``"unstable"``."""
    top = float(np.max(np.linalg.eigvals(matrix).real))
    if top < -tol:
        return "stable"
    if top <= tol:
        return "marginal"
    return "unstable"


def is_hurwitz(matrix: np.ndarray, tol: float = HURWITZ_TOL) -> bool:
    return hurwitz_class(matrix, tol) == "stable"


def mu_bar(r_prime: np.ndarray) -> float | None:
    """Largest step size keeping ``I - mu R'`` Schur-stable, or None if ``-R'`` is not Hurwitz."""
    if not is_hurwitz(-np.asarray(r_prime)):
        return None
    lam = np.linalg.eigvals(r_prime)
    return float(np.min(2.0 * lam.real / np.abs(lam) ** 2))


def eta_bar(ensemble: AgentEnsemble, split: SpectralSplit) -> float:
    """Regularization above which ``V^T H V + eta Lambda`` is positive definite.

    Uses the Schur complement Z of the averaged covariance and divides by the
    Fiedler value (smallest nonzero Laplacian eigenvalue). A Z that is
    singular but PSD gives 0; eigenvalues within roundoff of zero are treated
    as zero.
    """
    Rsum = ensemble.covariances.sum(axis=0)
    if np.linalg.eigvalsh(Rsum)[0] <= 1e-12 * max(1.0, np.abs(Rsum).max()):
        raise ValueError("sum of covariances is singular")
    Z = build_dynamics(ensemble, split, 0.0, 0.0).schur_z
    lam_z = np.linalg.eigvalsh(Z)[0]
    if abs(lam_z) <= 1e-12 * max(1.0, np.abs(Z).max()):
        return 0.0
    return float(max(0.0, -lam_z / split.laplacian_eigs.min()))


def closed_form_eigenvalues(R_u: np.ndarray, laplacian_eigs, eta: float) -> np.ndarray:
    """Eigenvalues of R' for a common covariance, without forming R'.

    Returns the M eigenvalues of ``R_u`` plus both roots of
    ``x**2 - (r + eta*l) x + l = 0`` for every eigenvalue r of ``R_u`` and
    every nonzero Laplacian eigenvalue l.
    """
    R_u = np.atleast_2d(np.asarray(R_u, dtype=float))
    r = np.linalg.eigvalsh(0.5 * (R_u + R_u.T))
    if r[0] <= 0:
        raise ValueError("R_u must be positive definite")
    lap = np.asarray(laplacian_eigs, dtype=float).reshape(-1)
    lap = lap[lap > 1e-10 * max(1.0, lap.max(initial=0.0))]
    b = r[None, :] + eta * lap[:, None]
    disc = np.lib.scimath.sqrt(b**2 - 4.0 * lap[:, None])
    tau = np.concatenate([(0.5 * (b + disc)).ravel(), (0.5 * (b - disc)).ravel()])
    return np.concatenate([r.astype(complex), tau.astype(complex)])


def match_spectra(a, b) -> float:
    """Greedy minimum-distance matching of two multisets; returns the worst matched gap."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError(f"multiset sizes differ: {a.size} vs {b.size}")
    dist = np.abs(a[:, None] - b[None, :])
    worst = 0.0
    for _ in range(a.size):
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        worst = max(worst, float(dist[i, j]))
        dist[i, :] = np.inf
        dist[:, j] = np.inf
    return worst


@dataclass(frozen=True)
class LargeEtaBounds:
    bound: float
    fully_connected: float | None
    degree_necessary: float | None


def step_bound_large_eta(laplacian_eigs, eta: float) -> float:
    """``2 / (eta * lambda_max(L))``, the large-eta step-size limit."""
    if eta <= 0:
        raise ValueError("the large-eta bound needs eta > 0")
    lam1 = float(np.max(laplacian_eigs))
    if lam1 <= 0:
        raise ValueError("topology has no edges")
    return 2.0 / (eta * lam1)


def large_eta_bounds(topology: NetworkTopology, eta: float) -> LargeEtaBounds:
    """Large-eta bound plus its fully-connected and max-degree forms."""
    if not topology.connected:
        raise ValueError("topology must be connected")
    N = topology.num_nodes
    bound = step_bound_large_eta([largest_laplacian_eigenvalue(topology)], eta)
    full = 2.0 / (eta * N) if topology.num_edges == N * (N - 1) // 2 else None
    delta = int(topology.degrees().max())
    degree = 2.0 * (N - 1) / (eta * N * delta) if delta > 0 else None
    return LargeEtaBounds(bound=bound, fully_connected=full, degree_necessary=degree)


def diffusion_mu_bound(ensemble: AgentEnsemble) -> float:
    """``min_k 2 / lambda_max(R_{u,k})`` over agents with nonzero covariance."""
    lam = np.array([np.linalg.eigvalsh(R)[-1] for R in ensemble.covariances])
    lam = lam[lam > 1e-12]
    if lam.size == 0:
        raise ValueError("all covariances are zero")
    return float(np.min(2.0 / lam))


# ---------------------------------------------------------------------------
# MSD


MSD_METHODS = ("primal_dual", "ah", "al_large_eta", "diffusion", "consensus", "noncoop")


def laplacian_pinv(laplacian: np.ndarray, dim: int, split: SpectralSplit | None = None) -> np.ndarray:
    """Pseudoinverse of ``L kron I_M`` built from the nonzero eigenpairs."""
    if split is not None:
        core = split.v2 @ np.diag(1.0 / split.laplacian_eigs) @ split.v2.T
    else:
        lam, V = np.linalg.eigh(laplacian)
        keep = lam > 1e-10 * max(1.0, lam.max())
        core = V[:, keep] @ np.diag(1.0 / lam[keep]) @ V[:, keep].T
    return np.kron(core, np.eye(dim))


def _first_order_centralized(ensemble: AgentEnsemble, mu: float) -> float:
    N = ensemble.num_agents
    Rsum = ensemble.covariances.sum(axis=0)
    Rnoise = np.einsum("k,kij->ij", ensemble.noise_vars, ensemble.covariances)
    return float(mu / (2 * N) * np.trace(np.linalg.solve(Rsum, Rnoise)))


def msd_theory(
    ensemble: AgentEnsemble,
    laplacian: np.ndarray,
    mu: float,
    eta: float = 0.0,
    method: str = "primal_dual",
    split: SpectralSplit | None = None,
) -> float:
    """First-order (in mu) steady-state network MSD.

    ``primal_dual``: ``mu/(2N) Tr(R_z (H + eta L)^-1)``.
    ``ah`` and ``noncoop``: ``mu M/(2N) sum_k sigma_k^2``.
    ``diffusion`` / ``consensus``: ``mu/(2N) Tr((sum R)^-1 sum sigma^2 R)``.
    ``al_large_eta``: the diffusion value plus ``mu/(2N eta) Tr(R_z L^+)``.
    """
    N, M = ensemble.num_agents, ensemble.dim
    sig = ensemble.noise_vars
    if method not in MSD_METHODS:
        raise ValueError(f"unknown MSD method {method!r}")
    if method == "noncoop":
        return float(mu * M / (2 * N) * sig.sum())
    if method == "ah":
        lam_min = min(np.linalg.eigvalsh(R)[0] for R in ensemble.covariances)
        if lam_min <= 1e-12:
            raise ValueError("AH MSD needs every covariance positive definite")
        return float(mu * M / 2 * sig.mean())
    if method in ("diffusion", "consensus"):
        return _first_order_centralized(ensemble, mu)
    if method == "al_large_eta":
        if eta <= 0:
            raise ValueError("al_large_eta needs eta > 0")
        Lp = laplacian_pinv(laplacian, M, split)
        extra = mu / (2 * N * eta) * np.trace(ensemble.r_z @ Lp)
        return float(_first_order_centralized(ensemble, mu) + extra)

    K = ensemble.h_block + eta * np.kron(laplacian, np.eye(M))
    try:
        chol = np.linalg.cholesky(0.5 * (K + K.T))
    except np.linalg.LinAlgError:
        hint = ""
        if split is not None:
            hint = f" (eta_bar = {eta_bar(ensemble, split):.6g})"
        raise ValueError(f"H + eta L is not positive definite at eta={eta}{hint}") from None
    Kinv = np.linalg.inv(chol).T @ np.linalg.inv(chol)
    return float(mu / (2 * N) * np.trace(ensemble.r_z @ Kinv))


def solve_second_moment(B: np.ndarray, Q: np.ndarray, max_doublings: int = 200) -> np.ndarray:
    """Steady state of ``P <- B P B^T + Q`` by repeated squaring of B."""
    if spectral_radius(B) >= 1:
        raise ValueError("rho(B') >= 1: no steady state")
    X = Q.copy()
    A = B.copy()
    for _ in range(max_doublings):
        inc = A @ X @ A.T
        X = X + inc
        scale = np.abs(X).max()
        if np.abs(inc).max() <= 1e-14 * min(1.0, scale) or scale == 0:
            return X
        A = A @ A
    raise RuntimeError("second-moment iteration did not converge")


def msd_fixed_point(dynamics: DynamicsMatrices, mu: float | None = None, num_nodes: int | None = None,
                    method: str = "lyapunov") -> float:
    """Steady-state network MSD from the mean-square recursion.

    ``method="explicit"`` forms ``F' = B'^T kron_b B'^T`` and solves
    ``(I - F') x = bvec(Phi)``; it is allowed only up to size 64.
    ``method="lyapunov"`` iterates the equivalent second-moment fixed point.
    """
    mu = dynamics.mu if mu is None else mu
    N = dynamics.num_nodes if num_nodes is None else num_nodes
    B = dynamics.b_prime
    if not np.isclose(mu, dynamics.mu, rtol=1e-15, atol=0):
        B = np.eye(dynamics.size) - mu * dynamics.r_prime
    if spectral_radius(B) >= 1:
        raise ValueError("rho(B') >= 1: no steady state")
    Phi = dynamics.phi()
    if method == "explicit":
        if dynamics.size > 64:
            raise ValueError("explicit F' path is limited to (2N-1)M <= 64")
        m = dynamics.dim
        F = block_kron(B.T, B.T, m)
        gamma = np.linalg.solve(np.eye(F.shape[0]) - F, bvec(Phi, m))
        return float(mu**2 / N * bvec(dynamics.r_h.T, m) @ gamma)
    if method != "lyapunov":
        raise ValueError(f"unknown method {method!r}")
    P = solve_second_moment(B, mu**2 * dynamics.r_h)
    return float(np.trace(Phi @ P) / N)


# ---------------------------------------------------------------------------
# per-strategy mean dynamics and reports


def mean_transition(config: AlgorithmConfig, ensemble: AgentEnsemble, topology: NetworkTopology,
                    split: SpectralSplit | None = None) -> np.ndarray:
    """Matrix propagating the mean error one step for the given strategy.

    Primal strategies act on the NM network error; primal-dual strategies
    use ``B'`` in the reduced coordinates (redundant duals never move).
    """
    mu = config.step_size
    M = ensemble.dim
    H = ensemble.h_block
    I = np.eye(H.shape[0])
    if config.kind == "noncoop":
        return I - mu * H
    if config.kind in ("diffusion_atc", "consensus"):
        Acal = np.kron(config.combination.weights, np.eye(M))
        if config.kind == "diffusion_atc":
            return Acal.T @ (I - mu * H)
        return Acal.T - mu * H
    split = spectral_split(topology) if split is None else split
    return build_dynamics(ensemble, split, config.eta, mu).b_prime


@dataclass(frozen=True)
class StabilityReport:
    label: str
    kind: str
    mu: float
    eta: float
    hurwitz: bool | None
    hurwitz_class: str | None
    mu_bar: float | None
    eta_bar: float | None
    rho_b_prime: float
    topo_bound_large_eta: float | None
    diffusion_mu_bound: float
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def stability_report(config: AlgorithmConfig, ensemble: AgentEnsemble, topology: NetworkTopology) -> StabilityReport:
    """Mean-stability summary of one strategy on one scenario."""
    split = spectral_split(topology) if topology.num_nodes > 1 else None
    hurwitz = hclass = mbar = topo = None
    try:
        ebar = eta_bar(ensemble, split) if split is not None else None
    except ValueError:
        ebar = None
    if config.kind == "primal_dual":
        dyn = build_dynamics(ensemble, split, config.eta, config.step_size)
        hclass = hurwitz_class(-dyn.r_prime)
        hurwitz = hclass == "stable"
        mbar = mu_bar(dyn.r_prime)
        if config.eta > 0:
            topo = step_bound_large_eta(split.laplacian_eigs, config.eta)
        rho = spectral_radius(dyn.b_prime)
    else:
        rho = spectral_radius(mean_transition(config, ensemble, topology, split))
    if abs(rho - 1.0) <= 1e-12:
        verdict = "marginal"
    else:
        verdict = "stable" if rho < 1 else "unstable"
    return StabilityReport(
        label=config.label,
        kind=config.kind,
        mu=config.step_size,
        eta=config.eta,
        hurwitz=hurwitz,
        hurwitz_class=hclass,
        mu_bar=mbar,
        eta_bar=ebar,
        rho_b_prime=rho,
        topo_bound_large_eta=topo,
        diffusion_mu_bound=diffusion_mu_bound(ensemble),
        verdict=verdict,
    )


def theory_msd_for(config: AlgorithmConfig, ensemble: AgentEnsemble, topology: NetworkTopology) -> float | None:
    """First-order MSD prediction matching a strategy, or None when its preconditions fail."""
    L = topology.laplacian
    mu = config.step_size
    try:
        if config.kind == "noncoop":
            return msd_theory(ensemble, L, mu, method="noncoop")
        if config.kind == "diffusion_atc":
            return msd_theory(ensemble, L, mu, method="diffusion")
        if config.kind == "consensus":
            return msd_theory(ensemble, L, mu, method="consensus")
        if config.eta == 0:
            return msd_theory(ensemble, L, mu, method="ah")
        return msd_theory(ensemble, L, mu, config.eta, method="primal_dual")
    except (ValueError, np.linalg.LinAlgError):
        return None
