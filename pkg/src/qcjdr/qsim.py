"""Dense density-matrix simulation of layered CNOT ansatz circuits.

Qubit 0 is the most significant bit: the basis state ``|b0 b1 ... >``
has index ``int("b0b1...", 2)``, matching ``np.kron`` ordering.
"""

import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import (
    ParameterError,
    check_density_matrix,
    check_probability,
    n_qubits_of,
)

MAX_QUBITS = 12

CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def euler_zyz(angles):
    """Single-qubit gate ``Rz(a) Ry(b) Rz(c)`` for ``angles = (a, b, c)``."""
    a, b, c = angles
    return rz(a) @ ry(b) @ rz(c)


def euler_zyz_batch(angles):
    """Vectorized ``euler_zyz`` over leading axes of ``angles[..., 3]``."""
    a, b, c = angles[..., 0], angles[..., 1], angles[..., 2]
    cb, sb = np.cos(b / 2), np.sin(b / 2)
    ep = np.exp(-0.5j * (a + c))
    em = np.exp(-0.5j * (a - c))
    out = np.empty(angles.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = ep * cb
    out[..., 0, 1] = -em * sb
    out[..., 1, 0] = em.conj() * sb
    out[..., 1, 1] = ep.conj() * cb
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise and symmetric readout flips."""

    p1: float = 0.0
    p2: float = 0.0
    pm: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "pm"):
            check_probability(name, getattr(self, name))

    @property
    def is_ideal(self):
        return self.p1 == 0 and self.p2 == 0 and self.pm == 0


def _color_edges(n, edges):
    steps = []
    for edge in edges:
        for step in steps:
            if not any(q in e for e in step for q in edge):
                step.append(edge)
                break
        else:
            steps.append([edge])
    return tuple(tuple(s) for s in steps)


@dataclass(frozen=True)
class CircuitLayout:
    """Layered ansatz: per layer, each CNOT step is preceded by a column of
    single-qubit gates; a final column closes the circuit."""

    n: int
    edges: tuple
    schedule: tuple
    layers: int

    def __post_init__(self):
        if self.n < 1 or self.n > MAX_QUBITS:
            raise ParameterError(f"qubit count must lie in [1, {MAX_QUBITS}]")
        if self.layers < 0:
            raise ParameterError("layers must be non-negative")
        scheduled = []
        for step in self.schedule:
            used = [q for edge in step for q in edge]
            if len(used) != len(set(used)):
                raise ParameterError(f"schedule step {step} reuses a qubit")
            if any(not 0 <= q < self.n for q in used):
                raise ParameterError(f"schedule step {step} has an out-of-range qubit")
            scheduled.extend(step)
        if sorted(scheduled) != sorted(self.edges):
            raise ParameterError("schedule must cover every coupling edge exactly once")

    @property
    def steps_per_layer(self):
        return len(self.schedule)

    @property
    def n_columns(self):
        return self.steps_per_layer * self.layers + 1

    @property
    def n_params(self):
        return 3 * self.n * self.n_columns

    @property
    def n_cnots(self):
        return len(self.edges) * self.layers

    @cached_property
    def program(self):
        """Gate sequence as tuples ``("u", qubit, column)`` or ``("cx", control, target)``."""
        ops = []
        col = 0
        for _ in range(self.layers):
            for step in self.schedule:
                ops.extend(("u", q, col) for q in range(self.n))
                ops.extend(("cx", c, t) for c, t in step)
                col += 1
        ops.extend(("u", q, col) for q in range(self.n))
        return tuple(ops)

    def angles(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.n_params:
            raise ParameterError(f"expected {self.n_params} parameters, got {theta.shape[-1]}")
        return theta.reshape(theta.shape[:-1] + (self.n_columns, self.n, 3))

    def identity_params(self):
        return np.zeros(self.n_params)


def make_layout(n, layers, topology="auto"):
    """Build the layered ansatz on a chain or cycle coupling graph.

    ``"auto"`` uses a cycle for four or more qubits and an open chain
    below that.
    """
    if topology == "auto":
        topology = "cycle" if n >= 4 else "chain"
    if topology == "chain":
        edges = tuple((i, i + 1) for i in range(n - 1))
    elif topology == "cycle":
        if n < 3:
            raise ParameterError("a cycle needs at least three qubits")
        edges = tuple((i, (i + 1) % n) for i in range(n))
    else:
        raise ParameterError(f"unknown topology {topology!r}")
    # even-indexed edges first, then odd ones: two steps for chains and even cycles
    ordered = edges[0::2] + edges[1::2]
    return CircuitLayout(n, edges, _color_edges(n, ordered), layers)


def _apply(rho, U, qubits, n):
    """``U rho U^+`` with ``U`` acting on ``qubits`` of an ``n``-qubit state."""
    k = len(qubits)
    t = rho.reshape((2,) * (2 * n))
    Ut = U.reshape((2,) * (2 * k))
    t = np.tensordot(Ut, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    t = np.tensordot(t, Ut.conj(), axes=([n + q for q in qubits], list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), [n + q for q in qubits])
    return t.reshape(rho.shape)


def depolarize(rho, qubits, p, n):
    """Mix the listed qubits toward the maximally mixed state with probability ``p``."""
    if p == 0:
        return rho
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    traced_cols = cols.copy()
    for q in qubits:
        traced_cols[q] = rows[q]
    kept = [rows[i] for i in range(n) if i not in qubits] + [cols[i] for i in range(n) if i not in qubits]
    t = rho.reshape((2,) * (2 * n))
    reduced = np.einsum("".join(rows + traced_cols) + "->" + "".join(kept), t)
    eye_terms = [rows[q] + cols[q] for q in qubits]
    spec = ",".join(["".join(kept)] + eye_terms) + "->" + "".join(rows + cols)
    mixed = np.einsum(spec, reduced, *([np.eye(2)] * len(qubits))) / 2 ** len(qubits)
    return (1 - p) * rho + p * mixed.reshape(rho.shape)


def build_codeword_state(bits, pair, max_qubits=MAX_QUBITS):
    """Product state with ``rho_plus`` for bit 0 and ``rho_minus`` for bit 1."""
    bits = [int(b) for b in bits]
    if len(bits) > max_qubits:
        raise ParameterError(f"codeword length {len(bits)} exceeds the limit {max_qubits}")
    if any(b not in (0, 1) for b in bits):
        raise ParameterError("codeword bits must be 0 or 1")
    state = np.ones((1, 1), dtype=complex)
    for b in bits:
        state = np.kron(state, pair.rho_minus if b else pair.rho_plus)
    return state


def run_circuit(rho, layout, theta, noise=None):
    """Execute the ansatz with parameters ``theta`` on ``rho``.

    With a noise model, a depolarizing channel follows every gate on the
    qubits it touched. Readout noise is applied in
    ``measurement_distribution``, not here.
    """
    noise = noise or NoiseModel()
    rho = np.asarray(rho, dtype=complex)
    n = layout.n
    if rho.shape != (2**n, 2**n):
        raise ParameterError(f"state of shape {rho.shape} does not fit {n} qubits")
    gates = euler_zyz_batch(layout.angles(theta))
    for op in layout.program:
        if op[0] == "u":
            _, q, col = op
            rho = _apply(rho, gates[col, q], (q,), n)
            rho = depolarize(rho, (q,), noise.p1, n)
        else:
            _, c, t = op
            rho = _apply(rho, CNOT, (c, t), n)
            rho = depolarize(rho, (c, t), noise.p2, n)
    return rho


def circuit_unitary(layout, theta):
    """Full ``2^n x 2^n`` unitary of the noise-free ansatz."""
    n = layout.n
    gates = euler_zyz_batch(layout.angles(theta))
    U = np.eye(2**n, dtype=complex).reshape((2,) * n + (2**n,))
    for op in layout.program:
        if op[0] == "u":
            _, q, col = op
            U = np.moveaxis(np.tensordot(gates[col, q], U, axes=([1], [q])), 0, q)
        else:
            _, c, t = op
            U = np.moveaxis(
                np.tensordot(CNOT.reshape(2, 2, 2, 2), U, axes=([2, 3], [c, t])), [0, 1], [c, t]
            )
    return U.reshape(2**n, 2**n)


def measurement_distribution(rho, measured_qubits, pm=0.0):
    """Outcome probabilities of the measured qubits, with readout flips.

    Returns an array of length ``2**len(measured_qubits)``; entry ``k``
    is the probability of the bitstring ``k`` written in binary with the
    first measured qubit as the most significant bit.
    """
    rho = np.asarray(rho)
    n = n_qubits_of(rho.shape[0])
    measured = [int(q) for q in measured_qubits]
    if len(set(measured)) != len(measured):
        raise ParameterError("measured qubits must be distinct")
    if any(not 0 <= q < n for q in measured):
        raise ParameterError(f"measured qubit out of range for {n} qubits")
    check_probability("pm", pm)
    probs = np.clip(np.diag(rho).real, 0, None).reshape((2,) * n)
    others = tuple(q for q in range(n) if q not in measured)
    probs = probs.sum(axis=others)
    # remaining axes are in increasing qubit order; reorder to the requested order
    order = sorted(measured)
    probs = np.transpose(probs, [order.index(q) for q in measured])
    if pm:
        flip = np.array([[1 - pm, pm], [pm, 1 - pm]])
        for axis in range(len(measured)):
            probs = np.moveaxis(np.tensordot(flip, probs, axes=([1], [axis])), 0, axis)
    return probs.reshape(-1)


def eigen_ensemble(rho, cutoff=1e-12):
    """Decompose ``rho`` into ``[(weight, pure_state_vector), ...]``."""
    rho = check_density_matrix(rho)
    vals, vecs = np.linalg.eigh(rho)
    return [(float(v), vecs[:, i]) for i, v in enumerate(vals) if v > cutoff][::-1]


def ensemble_distribution(rho, layout, theta, measured_qubits, noise=None):
    """Measurement statistics obtained by running each eigenvector separately
    and recombining with the eigenvalue weights."""
    noise = noise or NoiseModel()
    total = 0.0
    for weight, vec in eigen_ensemble(rho):
        out = run_circuit(np.outer(vec, vec.conj()), layout, theta, noise)
        total = total + weight * measurement_distribution(out, measured_qubits, noise.pm)
    return total
