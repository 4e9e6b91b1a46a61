import numpy as np
import pytest

from mixqas.densmat import DensityMatrix, PureState, apply_1q_gate, pure_to_density, X
from mixqas.tasks.maxcut import (
    Graph,
    MaxCutTask,
    complete_graph,
    edges_to_supercircuit,
    erdos_renyi,
    maxcut_hamiltonian,
    read_graph,
    write_graph,
)
from mixqas.tasks.state_init import StateInitTask, ghz_state, state_init_loss, w_state
from mixqas.verify import brute_force_cut_counts, random_density


# --- state initialization ----------------------------------------------------


def test_ghz_is_bell_for_two_qubits():
    amp = ghz_state(2).amplitudes
    assert amp[0] == pytest.approx(1 / np.sqrt(2))
    assert amp[3] == pytest.approx(1 / np.sqrt(2))
    assert amp[1] == amp[2] == 0


def test_w2_is_psi_bell():
    amp = w_state(2).amplitudes
    assert amp[1] == pytest.approx(1 / np.sqrt(2))
    assert amp[2] == pytest.approx(1 / np.sqrt(2))


def test_w3_amplitudes():
    amp = w_state(3).amplitudes
    for idx in (1, 2, 4):
        assert amp[idx] == pytest.approx(1 / np.sqrt(3))
    assert np.abs(amp[np.array([0, 3, 5, 6, 7])]).max() == 0


def test_state_constructors_reject_single_qubit():
    with pytest.raises(ValueError):
        ghz_state(1)
    with pytest.raises(ValueError):
        w_state(1)


def test_state_init_loss_values():
    target = ghz_state(2)
    rho = pure_to_density(target)
    assert state_init_loss(rho.mat, target) == pytest.approx(0.0, abs=1e-12)
    mixed = np.eye(4) / 4
    assert state_init_loss(mixed, target) == pytest.approx(1 - 1 / 4)
    zero = pure_to_density(PureState.basis(2, 0))
    assert state_init_loss(zero.mat, target) == pytest.approx(0.5)


def test_state_init_loss_zero_iff_target():
    # loss 0 implies the state is exactly the rank-1 target projector
    rng = np.random.default_rng(0)
    task = StateInitTask("ghz", 2)
    for _ in range(10):
        mat = random_density(rng, 2, rank=2)
        loss = task.loss_mat(mat)
        if loss < 1e-9:
            assert np.abs(mat - pure_to_density(task.target).mat).max() < 1e-4
    exact = pure_to_density(task.target).mat
    assert task.loss_mat(exact) < 1e-12


# --- max-cut -------------------------------------------------------------------


def test_single_edge_hamiltonian():
    h = maxcut_hamiltonian(Graph(2, ((0, 1),)))
    assert np.array_equal(h, [0, 1, 1, 0])


def test_path_graph_hamiltonian():
    h = maxcut_hamiltonian(Graph(3, ((0, 1), (1, 2))))
    assert np.array_equal(h, [0, 1, 2, 1, 1, 2, 1, 0])


def test_no_cut_for_trivial_partition():
    rng = np.random.default_rng(1)
    for _ in range(5):
        g = erdos_renyi(5, 0.5, rng)
        h = maxcut_hamiltonian(g)
        assert h[0] == 0
        assert h[-1] == 0


def test_hamiltonian_matches_brute_force():
    rng = np.random.default_rng(2)
    for n in range(2, 8):
        g = erdos_renyi(n, 0.4, rng)
        assert np.array_equal(maxcut_hamiltonian(g), brute_force_cut_counts(g))


def test_complete_k3_task():
    task = MaxCutTask(complete_graph(3))
    assert task.true_max == 2
    assert task.optimal_states == frozenset(range(1, 7))


def test_optimal_states_complement_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(5):
        task = MaxCutTask(erdos_renyi(6, 0.5, rng))
        full = (1 << 6) - 1
        assert {full ^ k for k in task.optimal_states} == set(task.optimal_states)


def test_erdos_renyi_determinism_and_limits():
    g1 = erdos_renyi(6, 0.5, 42)
    g2 = erdos_renyi(6, 0.5, 42)
    assert g1.edges == g2.edges
    dense = erdos_renyi(6, 0.999999, 0)
    assert dense.n_edges == 15  # effectively complete
    sparse = erdos_renyi(4, 0.01, 5)
    assert sparse.n_edges >= 1  # empty graphs are resampled
    with pytest.raises(ValueError):
        erdos_renyi(4, 1.0, 0)


def test_maxcut_loss_values():
    task = MaxCutTask(complete_graph(3))
    # concentrated on an optimal partition
    opt = np.zeros((8, 8), dtype=complex)
    opt[1, 1] = 1.0
    assert task.loss_mat(opt) == pytest.approx(-task.true_max / 3)
    zero = np.zeros((8, 8), dtype=complex)
    zero[0, 0] = 1.0
    assert task.loss_mat(zero) == pytest.approx(0.0)
    uniform = np.full((8, 8), 1 / 8, dtype=complex)
    assert task.loss_mat(uniform) == pytest.approx(-0.5)


def test_maxcut_metrics_values():
    task = MaxCutTask(complete_graph(3))
    opt = DensityMatrix.basis(3, 1)
    assert task.final_metrics(opt) == {"E_m": pytest.approx(1.0), "P_m": pytest.approx(1.0)}
    uniform = DensityMatrix(3, np.full((8, 8), 1 / 8, dtype=complex))
    metrics = task.final_metrics(uniform)
    assert metrics["E_m"] == pytest.approx(0.75)
    assert metrics["P_m"] == pytest.approx(0.75)
    zero = DensityMatrix.basis(3, 0)
    assert task.final_metrics(zero) == {"E_m": pytest.approx(0.0), "P_m": pytest.approx(0.0)}


def test_metrics_invariant_under_bit_complement():
    rng = np.random.default_rng(4)
    task = MaxCutTask(erdos_renyi(4, 0.6, rng))
    rho = DensityMatrix(4, random_density(rng, 4))
    flipped = rho
    for q in range(4):
        flipped = apply_1q_gate(flipped, X, q)
    assert task.final_metrics(rho)["E_m"] == pytest.approx(
        task.final_metrics(flipped)["E_m"])
    assert task.final_metrics(rho)["P_m"] == pytest.approx(
        task.final_metrics(flipped)["P_m"])


def test_uniform_initial_state():
    task = MaxCutTask(complete_graph(3))
    vec = task.initial_vec()
    assert np.allclose(vec, 1 / np.sqrt(8))
    assert np.allclose(task.initial_mat(), 1 / 8)


def test_edges_to_supercircuit():
    g = Graph(4, ((0, 1), (2, 3), (1, 3)))
    structure = edges_to_supercircuit(g)
    assert structure.n_subcircuits == 3
    assert structure.n_sub_qubits == 2
    assert np.array_equal(structure.rows, [[0, 1], [2, 3], [1, 3]])
    assert edges_to_supercircuit(complete_graph(3)).n_subcircuits == 3


def test_graph_file_round_trip(tmp_path):
    g = erdos_renyi(6, 0.5, 9)
    path = tmp_path / "graph.txt"
    write_graph(g, path)
    back = read_graph(path)
    assert back.n_vertices == g.n_vertices
    assert back.edges == g.edges
