import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("qudcomp", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("qudcomp")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def kron_all(*mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def embed(U, k, dims):
    """Dense ``I (x) ... (x) U (x) ... (x) I`` with ``U`` on qudit ``k``."""
    mats = [np.eye(d) for d in dims]
    mats[k] = U
    return kron_all(*mats)


def dense_unitary(circuit):
    """Reference unitary of a measurement-free circuit, built column by column.

    Deliberately naive: each gate is expanded to a full matrix by walking
    every basis index, so it shares no code with the simulator kernels.
    """
    dims = circuit.dims
    D = int(np.prod(dims))
    axis = {qid: k for k, qid in enumerate(circuit.ids)}
    U = np.eye(D, dtype=complex)
    for op in circuit.gates:
        G = op.gate.matrix
        axes = [axis[t] for t in op.targets]
        ldims = [dims[a] for a in axes]
        full = np.zeros((D, D), dtype=complex)
        for col in range(D):
            digits = list(np.unravel_index(col, dims))
            local_in = np.ravel_multi_index([digits[a] for a in axes], ldims)
            for local_out in range(G.shape[0]):
                amp = G[local_out, local_in]
                if amp == 0:
                    continue
                out = list(digits)
                for a, v in zip(axes, np.unravel_index(local_out, ldims)):
                    out[a] = v
                full[np.ravel_multi_index(out, dims), col] += amp
        U = full @ U
    return U


ACCEPTANCE = {}


def record(number, ok, detail):
    """Print and remember one pass/fail line for an acceptance criterion."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    print(line)
    ACCEPTANCE[number] = line
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
