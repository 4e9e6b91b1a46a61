import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger the one-time numba compilation before any timed test runs."""
    from mixqas.difftape import backward, record_forward
    from mixqas.searchspace import ArchLogits, build_macro_program

    program = build_macro_program(2, 1)
    logits = ArchLogits(alpha=np.zeros((1, 2, 5)))
    rho0 = np.diag([1.0, 0, 0, 0]).astype(complex)
    out, tape = record_forward(program, logits, np.zeros((1, 2)), rho0)
    backward(tape, np.eye(4, dtype=complex))
