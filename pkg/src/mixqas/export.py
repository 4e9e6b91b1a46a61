"""Architecture export: JSON records and OpenQASM 2.0 renderings.

The JSON record carries {n, m, gateset, A, theta}; micro architectures add
the super-circuit rows.  The QASM rendering decomposes rotations into u3
and CNOTs into cx (Rz maps to u3(0, 0, theta), which differs from Rz by a
global phase only); identity positions are omitted.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .searchspace import (
    SuperCircuitStructure,
    build_macro_program,
    build_micro_program,
    MixPosition,
)


def architecture_record(A, theta, gateset, n, structure=None) -> dict:
    A = np.asarray(A)
    rec = {
        "n": int(n),
        "m": int(A.shape[0]),
        "gateset": gateset.names,
        "A": A.tolist(),
        "theta": np.asarray(theta).tolist(),
    }
    if structure is not None:
        rec["supercircuit"] = structure.rows.tolist()
    return rec


def save_architecture(record, path):
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_architecture(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _record_program(record):
    n, m = record["n"], record["m"]
    if "supercircuit" in record:
        structure = SuperCircuitStructure(np.asarray(record["supercircuit"]), n)
        return build_micro_program(structure, m)
    return build_macro_program(n, m)


def to_qasm(record) -> str:
    """OpenQASM 2.0 text for the discrete circuit in a JSON record."""
    program = _record_program(record)
    A = np.asarray(record["A"])
    theta = np.asarray(record["theta"])
    gs = program.gateset
    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";', f'qreg q[{record["n"]}];']
    for step in program.steps:
        if not isinstance(step, MixPosition):
            continue
        g = gs.entries[int(A[step.i, step.j])]
        if g.kind == "I":
            continue
        if g.kind == "CNOT":
            lines.append(f"cx q[{step.control}],q[{step.targets[g.offset - 1]}];")
            continue
        th = float(theta[step.theta_idx])
        if g.kind == "RX":
            lines.append(f"u3({th!r},-pi/2,pi/2) q[{step.control}];")
        elif g.kind == "RY":
            lines.append(f"u3({th!r},0,0) q[{step.control}];")
        else:  # RZ up to global phase
            lines.append(f"u3(0,0,{th!r}) q[{step.control}];")
    return "\n".join(lines) + "\n"


_U3_RE = re.compile(r"u3\(([^,]+),([^,]+),([^)]+)\)\s+q\[(\d+)\];")
_CX_RE = re.compile(r"cx\s+q\[(\d+)\],q\[(\d+)\];")
_QREG_RE = re.compile(r"qreg\s+q\[(\d+)\];")


def _angle(token):
    token = token.strip()
    if token == "pi/2":
        return np.pi / 2
    if token == "-pi/2":
        return -np.pi / 2
    return float(token)


def u3_matrix(theta, phi, lam):
    """The qelib1 u3 gate."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ])


def parse_qasm(text):
    """Parse the subset emitted by ``to_qasm``: (n, ops) with ops of the
    form ('u3', (theta, phi, lam), q) or ('cx', control, target)."""
    n = None
    ops = []
    for line in text.splitlines():
        line = line.strip()
        m = _QREG_RE.fullmatch(line)
        if m:
            n = int(m.group(1))
            continue
        m = _U3_RE.fullmatch(line)
        if m:
            ops.append(("u3", tuple(_angle(m.group(i)) for i in (1, 2, 3)),
                        int(m.group(4))))
            continue
        m = _CX_RE.fullmatch(line)
        if m:
            ops.append(("cx", int(m.group(1)), int(m.group(2))))
    if n is None:
        raise ValueError("QASM text has no qreg declaration")
    return n, ops
