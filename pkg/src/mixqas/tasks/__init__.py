from .classify import ClassifyTask, bce_loss, encode_angle, encode_dense, pca_fit_transform
from .maxcut import (
    Graph,
    MaxCutTask,
    edges_to_supercircuit,
    erdos_renyi,
    maxcut_hamiltonian,
    read_graph,
    write_graph,
)
from .state_init import StateInitTask, ghz_state, state_init_loss, w_state
