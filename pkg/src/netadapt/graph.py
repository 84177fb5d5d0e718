"""Network topologies: incidence/Laplacian matrices, SVD split and combination weights.

Nodes are 1-based in every public interface (edge lists, topology files) and
0-based in every array.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected graph without self-loops.

    Attributes
    ----------
    num_nodes : int
        Number of agents N.
    edges : tuple of (int, int)
        1-based node pairs ``(k, l)`` with ``k < l`` in lexicographic order.
    neighborhoods : tuple of frozenset
        ``neighborhoods[k-1]`` holds the 1-based neighbors of node k,
        including k itself.
    connected : bool
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    neighborhoods: tuple[frozenset[int], ...] = field(repr=False)
    connected: bool

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def incidence(self) -> np.ndarray:
        return incidence_matrix(self)

    @cached_property
    def laplacian(self) -> np.ndarray:
        return laplacian(self)

    def degrees(self) -> np.ndarray:
        """Number of neighbors of each node, excluding the node itself."""
        return np.array([len(nb) - 1 for nb in self.neighborhoods])


def build_topology(num_nodes: int, edges: Iterable[Sequence[int]]) -> NetworkTopology:
    """Validate an edge list and build a :class:`NetworkTopology`.

    Edges may be given in either orientation; they are stored as ``(k, l)``
    with ``k < l`` and sorted. Duplicates (in either orientation), self-loops
    and out-of-range endpoints raise ``ValueError``.
    """
    if int(num_nodes) != num_nodes or num_nodes < 1:
        raise ValueError(f"num_nodes must be a positive integer, got {num_nodes!r}")
    num_nodes = int(num_nodes)

    canonical = set()
    for pair in edges:
        if len(pair) != 2:
            raise ValueError(f"edge {pair!r} is not a pair")
        k, l = (int(pair[0]), int(pair[1]))
        if k == l:
            raise ValueError(f"self-loop on node {k}")
        if not (1 <= k <= num_nodes and 1 <= l <= num_nodes):
            raise ValueError(f"edge ({k}, {l}) out of range for N={num_nodes}")
        e = (min(k, l), max(k, l))
        if e in canonical:
            raise ValueError(f"duplicate edge {e}")
        canonical.add(e)

    ordered = tuple(sorted(canonical))
    nbrs: list[set[int]] = [{k} for k in range(1, num_nodes + 1)]
    for k, l in ordered:
        nbrs[k - 1].add(l)
        nbrs[l - 1].add(k)

    # breadth-first traversal from node 1
    seen = {1}
    queue = deque([1])
    while queue:
        k = queue.popleft()
        for l in nbrs[k - 1]:
            if l not in seen:
                seen.add(l)
                queue.append(l)

    return NetworkTopology(
        num_nodes=num_nodes,
        edges=ordered,
        neighborhoods=tuple(frozenset(s) for s in nbrs),
        connected=len(seen) == num_nodes,
    )


def incidence_matrix(topology: NetworkTopology) -> np.ndarray:
    """E x N signed incidence matrix: +1 at the lower endpoint, -1 at the higher."""
    C = np.zeros((topology.num_edges, topology.num_nodes))
    for e, (k, l) in enumerate(topology.edges):
        C[e, k - 1] = 1.0
        C[e, l - 1] = -1.0
    return C


def laplacian(topology: NetworkTopology) -> np.ndarray:
    """Graph Laplacian, ``C.T @ C``."""
    C = incidence_matrix(topology)
    return C.T @ C


def fiedler_value(topology: NetworkTopology) -> float:
    """Second-smallest Laplacian eigenvalue (0.0 for a single node)."""
    if topology.num_nodes < 2:
        return 0.0
    eigs = np.linalg.eigvalsh(laplacian(topology))
    return float(max(eigs[1], 0.0))


@dataclass(frozen=True)
class SpectralSplit:
    """SVD factors of the incidence matrix, ``C = U S V^T`` with ``V = [V2 | 1/sqrt(N)]``.

    ``s2`` is the (N-1) x (N-1) diagonal of nonzero singular values (descending)
    and ``laplacian_eigs`` (descending) are the nonzero Laplacian eigenvalues, equal to ``diag(s2)**2``.
    """

    u_factor: np.ndarray
    s2: np.ndarray
    v2: np.ndarray
    v0: np.ndarray
    laplacian_eigs: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.v2.shape[0]

    def padded_s(self) -> np.ndarray:
        """The E x N matrix S with ``s2`` in its top-left corner."""
        E = self.u_factor.shape[0]
        N = self.num_nodes
        S = np.zeros((E, N))
        S[: N - 1, : N - 1] = self.s2
        return S

    @property
    def v_full(self) -> np.ndarray:
        return np.hstack([self.v2, self.v0])


def spectral_split(topology: NetworkTopology) -> SpectralSplit:
    """Split the SVD of the incidence matrix into its range and null-space parts.

    Each column of ``v2`` is signed so its first entry of magnitude > 1e-12 is
    positive; the matching column of ``u_factor`` is flipped with it. Repeated
    singular values leave the basis of ``v2`` otherwise arbitrary; everything
    computed downstream depends only on similarity-invariant spectra.
    """
    if not topology.connected:
        raise ValueError("spectral split requires a connected topology")
    N = topology.num_nodes
    if N < 2:
        raise ValueError("spectral split requires at least two nodes")

    C = incidence_matrix(topology)
    U, s, Vt = np.linalg.svd(C, full_matrices=True)
    s2 = s[: N - 1]
    if s2[-1] <= 1e-10 * s2[0]:
        raise ValueError("incidence matrix rank is below N-1")

    V2 = Vt[: N - 1].T.copy()
    U = U.copy()
    for j in range(N - 1):
        col = V2[:, j]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        if first < 0:
            V2[:, j] = -col
            U[:, j] = -U[:, j]

    v0 = np.full((N, 1), 1.0 / np.sqrt(N))
    # eigenvalues of the integer Laplacian directly: squaring s2 loses an ulp
    lap_eigs = np.sort(np.linalg.eigvalsh(laplacian(topology)))[::-1][: N - 1]
    return SpectralSplit(
        u_factor=U,
        s2=np.diag(s2),
        v2=V2,
        v0=v0,
        laplacian_eigs=lap_eigs,
    )


@dataclass(frozen=True)
class CombinationMatrix:
    """Nonnegative left-stochastic combination weights; ``weights[l, k] = a_{lk}``."""

    weights: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.weights, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("combination matrix must be square")
        if np.any(A < 0):
            raise ValueError("combination weights must be nonnegative")
        if not np.allclose(A.sum(axis=0), 1.0, atol=1e-12, rtol=0):
            raise ValueError("combination matrix must be left-stochastic (columns sum to 1)")
        object.__setattr__(self, "weights", A)

    @property
    def num_nodes(self) -> int:
        return self.weights.shape[0]

    def respects(self, topology: NetworkTopology) -> bool:
        """True if ``a_{lk} = 0`` whenever ``l`` is not a neighbor of ``k``."""
        A = self.weights
        for k, nb in enumerate(topology.neighborhoods):
            outside = [l for l in range(topology.num_nodes) if (l + 1) not in nb]
            if np.any(A[outside, k] != 0):
                return False
        return True


def metropolis_weights(topology: NetworkTopology) -> CombinationMatrix:
    """Metropolis rule, ``a_{lk} = 1/max(|N_k|, |N_l|)`` off the diagonal."""
    if not topology.connected:
        raise ValueError("Metropolis weights require a connected topology")
    N = topology.num_nodes
    size = np.array([len(nb) for nb in topology.neighborhoods])
    A = np.zeros((N, N))
    for k, l in topology.edges:
        w = 1.0 / max(size[k - 1], size[l - 1])
        A[k - 1, l - 1] = w
        A[l - 1, k - 1] = w
    A[np.diag_indices(N)] = 1.0 - A.sum(axis=0)
    return CombinationMatrix(A)


def identity_weights(num_nodes: int) -> CombinationMatrix:
    return CombinationMatrix(np.eye(num_nodes))


def largest_laplacian_eigenvalue(topology: NetworkTopology) -> float:
    return float(np.linalg.eigvalsh(laplacian(topology))[-1])


def load_topology(path: str | Path) -> NetworkTopology:
    """Read the text format: a header line ``N E`` then E lines ``k l`` (1-based).

    Blank lines and ``#`` comments are ignored.
    """
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise ValueError(f"{path}: empty topology file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"{path}: header must be 'N E'")
    N, E = int(header[0]), int(header[1])
    body = lines[1:]
    if len(body) != E:
        raise ValueError(f"{path}: header declares {E} edges, found {len(body)}")
    edges = []
    for line in body:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_topology(N, edges)


def dump_topology(topology: NetworkTopology) -> str:
    lines = [f"{topology.num_nodes} {topology.num_edges}"]
    lines += [f"{k} {l}" for k, l in topology.edges]
    return "\n".join(lines) + "\n"


def random_geometric_topology(
    num_nodes: int, rng: np.random.Generator, radius: float | None = None, max_tries: int = 1000
) -> NetworkTopology:
    """Connected random geometric graph on the unit square.

    Nodes closer than ``radius`` are linked; placements are redrawn until the
    graph is connected. The default radius is 1.2x the connectivity threshold
    ``sqrt(2 log N / (pi N))``.
    """
    if radius is None:
        radius = 1.2 * np.sqrt(2.0 * np.log(max(num_nodes, 2)) / (np.pi * num_nodes))
    for _ in range(max_tries):
        pts = rng.uniform(size=(num_nodes, 2))
        dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        ks, ls = np.nonzero(np.triu(dist < radius, k=1))
        topo = build_topology(num_nodes, zip(ks + 1, ls + 1))
        if topo.connected:
            return topo
    raise RuntimeError(f"no connected geometric graph after {max_tries} draws")


def random_connected_topology(
    num_nodes: int, rng: np.random.Generator, edge_prob: float = 0.4
) -> NetworkTopology:
    """Random spanning tree plus independent extra edges with probability ``edge_prob``."""
    order = rng.permutation(num_nodes) + 1
    edges = set()
    for j in range(1, num_nodes):
        parent = order[rng.integers(0, j)]
        child = order[j]
        edges.add((min(parent, child), max(parent, child)))
    for k in range(1, num_nodes + 1):
        for l in range(k + 1, num_nodes + 1):
            if (k, l) not in edges and rng.uniform() < edge_prob:
                edges.add((k, l))
    return build_topology(num_nodes, edges)


def complete_topology(num_nodes: int) -> NetworkTopology:
    return build_topology(
        num_nodes, [(k, l) for k in range(1, num_nodes + 1) for l in range(k + 1, num_nodes + 1)]
    )
