"""Unweighted max-cut as a diagonal Hamiltonian optimization task.

Vertex i of the graph maps to qubit i; basis state k encodes the partition
given by the bits of k, and the Hamiltonian diagonal counts the edges cut
by that partition.  The search starts from the uniform superposition over
all partitions and maximizes the expected cut.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..densmat import PureState
from ..searchspace import SuperCircuitStructure

# default micro-search shape: each edge becomes one 2-qubit, 3-layer
# subcircuit
MICRO_LAYERS = 3
MICRO_QUBITS = 2


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple

    def __post_init__(self):
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"bad edge ({u}, {v}) for n={self.n_vertices}")

    @property
    def n_edges(self):
        return len(self.edges)


def erdos_renyi(n, p_edge, seed) -> Graph:
    """G(n, p) with each unordered pair included independently; graphs with
    no edges are rejected and resampled.  Deterministic for a fixed seed."""
    if n < 2:
        raise ValueError("need at least 2 vertices")
    if not 0.0 < p_edge < 1.0:
        raise ValueError("p_edge must lie strictly inside (0, 1)")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    while True:
        mask = rng.uniform(size=len(pairs)) < p_edge
        edges = tuple(p for p, keep in zip(pairs, mask) if keep)
        if edges:
            return Graph(n, edges)


def complete_graph(n) -> Graph:
    return Graph(n, tuple((u, v) for u in range(n) for v in range(u + 1, n)))


def maxcut_hamiltonian(graph: Graph) -> np.ndarray:
    """Diagonal h with h[k] = number of edges cut by partition k."""
    k = np.arange(1 << graph.n_vertices)
    h = np.zeros(k.shape, dtype=np.float64)
    for u, v in graph.edges:
        h += ((k >> u) ^ (k >> v)) & 1
    return h


def write_graph(graph: Graph, path):
    lines = [str(graph.n_vertices)]
    lines += [f"{u} {v}" for u, v in graph.edges]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> Graph:
    with open(path) as fh:
        tokens = [line.split() for line in fh if line.strip()]
    n = int(tokens[0][0])
    edges = tuple((int(u), int(v)) for u, v in tokens[1:])
    return Graph(n, edges)


def edges_to_supercircuit(graph: Graph) -> SuperCircuitStructure:
    """One 2-qubit subcircuit per edge, acting on the qubits it connects."""
    if graph.n_edges < 1:
        raise ValueError("graph has no edges")
    rows = np.array(graph.edges, dtype=np.int64)
    return SuperCircuitStructure(rows, graph.n_vertices)


@dataclass
class MaxCutTask:
    graph: Graph
    h_diag: np.ndarray = field(init=False)
    true_max: int = field(init=False)
    optimal_states: frozenset = field(init=False)

    def __post_init__(self):
        if self.graph.n_edges == 0:
            raise ValueError("max-cut task needs at least one edge")
        self.h_diag = maxcut_hamiltonian(self.graph)
        self.true_max = int(self.h_diag.max())
        self.optimal_states = frozenset(np.flatnonzero(self.h_diag == self.true_max).tolist())

    @property
    def n_qubits(self):
        return self.graph.n_vertices

    def initial_vec(self):
        """Uniform superposition over all partitions, built analytically."""
        N = 1 << self.n_qubits
        return np.full(N, 1.0 / np.sqrt(N), dtype=np.complex128)

    def initial_mat(self):
        N = 1 << self.n_qubits
        return np.full((N, N), 1.0 / N, dtype=np.complex128)

    def supercircuit(self) -> SuperCircuitStructure:
        return edges_to_supercircuit(self.graph)

    # losses -------------------------------------------------------------------

    def loss_mat(self, rho_mat):
        """-<H_c>/|E|, in [-1, 0]."""
        e = float(np.sum(self.h_diag * np.real(np.diagonal(rho_mat))))
        return -e / self.graph.n_edges

    def adjoint_mat(self, rho_mat):
        return np.diag((-self.h_diag / self.graph.n_edges).astype(np.complex128))

    def loss_vec(self, psi):
        return -float(np.sum(self.h_diag * np.abs(psi) ** 2)) / self.graph.n_edges

    def adjoint_vec(self, psi):
        return (-self.h_diag / self.graph.n_edges) * psi

    # metrics --------------------------------------------------------------------

    def metrics_from_probs(self, probs):
        e_m = float(np.sum(self.h_diag * probs)) / self.true_max
        p_m = float(sum(probs[k] for k in sorted(self.optimal_states)))
        return e_m, p_m

    def final_metrics(self, state) -> dict:
        if isinstance(state, PureState):
            probs = np.abs(state.amplitudes) ** 2
        else:
            mat = state.mat if hasattr(state, "mat") else state
            probs = np.clip(np.real(np.diagonal(mat)), 0.0, 1.0)
        e_m, p_m = self.metrics_from_probs(probs)
        return {"E_m": e_m, "P_m": p_m}
