"""Codebooks, the average-success objective, and decoder optimizers.

The objective for states ``rho_i`` and assigned outcome strings ``b_i`` is

    J = (1/M) sum_i <b_i| U rho_i U^+ |b_i>

where only the measured qubits enter ``|b_i><b_i|``. Variational
circuits are trained by batched adaptive-moment ascent with an exact
adjoint gradient; unconstrained unitaries by ascent on the unitary group
with a polar retraction.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ParameterError, n_qubits_of
from .qsim import (
    MAX_QUBITS,
    PAULI_Z,
    NoiseModel,
    build_codeword_state,
    circuit_unitary,
    euler_zyz_batch,
    make_layout,
    measurement_distribution,
    run_circuit,
)


@dataclass(frozen=True)
class Codebook:
    n: int
    codewords: tuple
    output_map: tuple
    measured_qubits: tuple

    def __post_init__(self):
        if len(set(self.codewords)) != len(self.codewords):
            raise ParameterError("codewords must be distinct")
        if len(set(self.output_map)) != len(self.output_map):
            raise ParameterError("output map must be injective")
        if len(self.output_map) != len(self.codewords):
            raise ParameterError("one output string per codeword is required")
        if any(len(c) != self.n for c in self.codewords):
            raise ParameterError(f"codewords must have {self.n} bits")
        if any(len(b) != len(self.measured_qubits) for b in self.output_map):
            raise ParameterError("output strings must match the measured qubits")

    @property
    def M(self):
        return len(self.codewords)

    @property
    def labels(self):
        """Outcome index of each codeword in ``measurement_distribution`` order."""
        return np.array([int("".join(map(str, b)), 2) for b in self.output_map])

    def projector_diagonals(self):
        """``(M, 2**n)`` 0/1 masks of the basis states consistent with each output string."""
        k = np.arange(2**self.n)
        bits = np.stack([(k >> (self.n - 1 - q)) & 1 for q in self.measured_qubits], axis=1)
        return np.stack([np.all(bits == np.array(b), axis=1) for b in self.output_map]).astype(float)

    def with_output_map(self, output_map):
        return replace(self, output_map=tuple(tuple(b) for b in output_map))


def _bits(value, width):
    return tuple(int(c) for c in format(value, f"0{width}b")) if width else ()


def make_codebook(n, M, kind="parity", seed=0):
    """Codebook of ``M`` distinct ``n``-bit codewords.

    ``kind="parity"`` gives all even-weight strings (requires
    ``M == 2**(n-1)``); ``kind="random"`` draws ``M`` distinct strings.
    Codeword ``i`` is assigned the binary expansion of ``i`` on the first
    ``ceil(log2 M)`` qubits.
    """
    if n < 1 or M < 2:
        raise ParameterError("need n >= 1 and M >= 2")
    if M > 2**n:
        raise ParameterError(f"M={M} exceeds 2**n={2 ** n}")
    if kind == "parity":
        if M != 2 ** (n - 1):
            raise ParameterError("the parity code has exactly 2**(n-1) codewords")
        words = [w for w in range(2**n) if bin(w).count("1") % 2 == 0]
    elif kind == "random":
        words = np.random.default_rng(seed).choice(2**n, size=M, replace=False).tolist()
    else:
        raise ParameterError(f"unknown codebook kind {kind!r}")
    m = math.ceil(math.log2(M))
    return Codebook(
        n=n,
        codewords=tuple(_bits(w, n) for w in words),
        output_map=tuple(_bits(i, m) for i in range(M)),
        measured_qubits=tuple(range(m)),
    )


def codeword_states(book, pair):
    return np.stack([build_codeword_state(c, pair) for c in book.codewords])


@dataclass(frozen=True)
class Circuit:
    """An ansatz layout together with its gate angles."""

    layout: object
    theta: np.ndarray

    def unitary(self):
        return circuit_unitary(self.layout, self.theta)


@dataclass(frozen=True)
class TrainResult:
    params: np.ndarray
    J: float
    restarts: int
    iterations: int
    converged: bool
    layout: object = None
    restart_values: np.ndarray = field(default=None, repr=False)

    @property
    def error(self):
        return 1.0 - self.J

    def decoder(self):
        """The trained decoder in the form accepted by ``cost``."""
        return Circuit(self.layout, self.params) if self.layout is not None else self.params


def _check_states(states, n):
    states = np.asarray(states, dtype=complex)
    if states.ndim != 3 or states.shape[1:] != (2**n, 2**n):
        raise ParameterError(f"states must have shape (M, {2 ** n}, {2 ** n}), got {states.shape}")
    return states


def _success(U, states, proj):
    """Per-restart objective for unitaries of shape ``(..., d, d)``."""
    # diagonal of U rho U^+ without forming the full product
    diag = ((U[..., None, :, :] @ states) * np.conj(U)[..., None, :, :]).sum(axis=-1).real
    return (diag * proj).sum(axis=-1).mean(axis=-1)


def cost(decoder, states, book, noise=None):
    """Average probability of decoding each codeword state to its assigned string.

    ``decoder`` is a ``Circuit`` or a unitary matrix. Gate noise applies
    only to circuits; readout noise applies to both.
    """
    noise = noise or NoiseModel()
    states = _check_states(states, book.n)
    if len(states) != book.M:
        raise ParameterError(f"expected {book.M} states, got {len(states)}")
    if isinstance(decoder, Circuit):
        if decoder.layout.n != book.n:
            raise ParameterError("circuit width does not match the codebook")
        if noise.p1 == 0 and noise.p2 == 0:
            U = decoder.unitary()
            outs = [U @ s @ U.conj().T for s in states]
        else:
            outs = [run_circuit(s, decoder.layout, decoder.theta, noise) for s in states]
    else:
        U = np.asarray(decoder, dtype=complex)
        if U.shape != (2**book.n, 2**book.n):
            raise ParameterError(f"unitary of shape {U.shape} does not fit {book.n} qubits")
        outs = [U @ s @ U.conj().T for s in states]
    labels = book.labels
    probs = [measurement_distribution(o, book.measured_qubits, noise.pm)[lab]
             for o, lab in zip(outs, labels)]
    return float(np.mean(probs))


# --- variational circuits -------------------------------------------------

def _cnot_perm(n, c, t):
    k = np.arange(2**n)
    return k ^ (((k >> (n - 1 - c)) & 1) << (n - 1 - t))


class _AnsatzGradient:
    """Batched objective and exact gradient for a fixed layout and ensemble.

    Writing ``U = W_K ... W_1``, the derivative with respect to gate ``k``
    is ``(2/M) Re tr(dW_k V_{k-1} Y A_k)`` with ``V_{k-1}`` the partial
    product before the gate, ``A_k`` the product after it, and
    ``Y = sum_i rho_i U^+ Pi_i``. Both products are swept once per call.
    """

    def __init__(self, layout, states, proj):
        self.layout = layout
        self.states = states
        self.proj = proj
        n = layout.n
        self.shape_for = {q: (2**q, 2, 2 ** (n - q - 1)) for q in range(n)}
        self.perms = {(c, t): _cnot_perm(n, c, t)
                      for op, c, t in layout.program if op == "cx"}

    def _left(self, G, V, q):
        R, d = V.shape[0], V.shape[-1]
        a, _, c = self.shape_for[q]
        V = V.reshape(R, a, 2, c, d)
        return np.einsum("rij,rajcm->raicm", G, V).reshape(R, d, d)

    def _right(self, Z, G, q):
        R, d = Z.shape[0], Z.shape[-1]
        a, _, c = self.shape_for[q]
        Z = Z.reshape(R, d, a, 2, c)
        return np.einsum("rmaic,rij->rmajc", Z, G).reshape(R, d, d)

    def _reduced(self, V, Z, q):
        """Partial trace over all qubits but ``q`` of ``V @ Z``."""
        R, d = V.shape[0], V.shape[-1]
        a, _, c = self.shape_for[q]
        Vr = V.reshape(R, a, 2, c, d)
        Zr = Z.reshape(R, d, a, 2, c)
        return np.einsum("raxcm,rmabc->rxb", Vr, Zr)

    def value(self, thetas):
        U = circuit_unitary_batch(self.layout, thetas)
        return _success(U, self.states, self.proj)

    def value_and_grad(self, thetas):
        thetas = np.atleast_2d(thetas)
        layout = self.layout
        R, d = thetas.shape[0], 2**layout.n
        angles = layout.angles(thetas)
        gates = euler_zyz_batch(angles)
        shifted = angles.copy()
        shifted[..., 1] += np.pi
        dgates_b = 0.5 * euler_zyz_batch(shifted)
        dgates_a = -0.5j * np.einsum("ij,...jk->...ik", PAULI_Z, gates)
        dgates_c = -0.5j * np.einsum("...ij,jk->...ik", gates, PAULI_Z)

        V = np.broadcast_to(np.eye(d, dtype=complex), (R, d, d)).copy()
        prefixes = []
        for op in layout.program:
            prefixes.append(V)
            if op[0] == "u":
                _, q, col = op
                V = self._left(gates[:, col, q], V, q)
            else:
                V = V[:, self.perms[op[1:]], :]
        U = V
        Udag = np.conj(np.swapaxes(U, -1, -2))
        J = _success(U, self.states, self.proj)
        M = len(self.states)
        Y = np.einsum("imk,rkl,il->rml", self.states, Udag, self.proj)

        grad = np.zeros(angles.shape)
        Z = Y
        for k in range(len(layout.program) - 1, -1, -1):
            op = layout.program[k]
            if op[0] == "u":
                _, q, col = op
                e = self._reduced(prefixes[k], Z, q)
                for j, dg in enumerate((dgates_a, dgates_b, dgates_c)):
                    grad[:, col, q, j] = (2 / M) * np.einsum("rbx,rxb->r", dg[:, col, q], e).real
                Z = self._right(Z, gates[:, col, q], q)
            else:
                Z = Z[:, :, self.perms[op[1:]]]
        return J, grad.reshape(R, -1)


def circuit_unitary_batch(layout, thetas):
    thetas = np.atleast_2d(thetas)
    return np.stack([circuit_unitary(layout, t) for t in thetas])


def cost_gradient(circuit, states, book):
    """Exact gradient of the noise-free objective with respect to all angles."""
    states = _check_states(states, book.n)
    engine = _AnsatzGradient(circuit.layout, states, book.projector_diagonals())
    _, grad = engine.value_and_grad(np.asarray(circuit.theta, dtype=float)[None, :])
    return grad[0]


def train(states, book, layout, restarts=16, max_iters=2000, tol=1e-9, seed=0,
          learning_rate=0.05, init=None, polish=True):
    """Train the ansatz angles by multi-restart adaptive-moment ascent.

    All restarts run together as one batch. ``init`` adds explicit
    starting points (e.g. a shallower optimum padded with identities)
    ahead of the random ones. The best restart is then polished with a
    quasi-Newton ascent on the exact gradient.
    """
    states = _check_states(states, book.n)
    if layout.n != book.n:
        raise ParameterError("layout width does not match the codebook")
    engine = _AnsatzGradient(layout, states, book.projector_diagonals())
    rng = np.random.default_rng(seed)
    starts = rng.uniform(-np.pi, np.pi, size=(restarts, layout.n_params))
    if init is not None:
        init = np.atleast_2d(np.asarray(init, dtype=float))
        starts = np.concatenate([init, starts])[:max(restarts, len(init))]

    theta = starts.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    b1, b2, eps = 0.9, 0.999, 1e-12
    best_val = np.full(len(theta), -np.inf)
    best_theta = theta.copy()
    window, history = 50, []
    it = 0
    for it in range(1, max_iters + 1):
        J, g = engine.value_and_grad(theta)
        better = J > best_val
        best_val[better] = J[better]
        best_theta[better] = theta[better]
        history.append(best_val.copy())
        if len(history) > window and np.all(history[-1] - history[-1 - window] < tol):
            break
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta = theta + learning_rate * (m / (1 - b1**it)) / (np.sqrt(v / (1 - b2**it)) + eps)

    order = np.argsort(best_val)[::-1]
    top = best_theta[order[0]]
    J_top = float(best_val[order[0]])
    converged = False
    if polish:
        def neg(x):
            val, grad = engine.value_and_grad(x[None, :])
            return -val[0], -grad[0]

        res = optimize.minimize(neg, top, jac=True, method="L-BFGS-B",
                                options={"maxiter": 5000, "gtol": 1e-12, "ftol": 1e-15})
        if -res.fun >= J_top:
            top, J_top = res.x, float(-res.fun)
        _, grad = engine.value_and_grad(top[None, :])
        converged = bool(np.linalg.norm(grad) < 1e-6)
    else:
        converged = bool(len(history) > window
                         and history[-1][order[0]] - history[-1 - window][order[0]] < tol)
    J_top = float(engine.value(top[None, :])[0])
    return TrainResult(params=top, J=J_top, restarts=len(starts), iterations=it,
                       converged=converged, layout=layout, restart_values=best_val)


# --- unconstrained unitaries ----------------------------------------------

def _polar(X):
    W, _, Vh = np.linalg.svd(X)
    return W @ Vh


def unitary_gradient(U, states, proj):
    """Euclidean gradient ``(2/M) sum_i Pi_i U rho_i`` (batched over ``U``)."""
    M = len(states)
    UR = U[:, None] @ states[None]  # (R, M, d, d)
    return (2 / M) * np.einsum("il,rilm->rlm", proj, UR)


def optimize_unitary(states, book, restarts=8, max_iters=2000, tol=1e-12, seed=0, init=None):
    """Maximize the objective over all ``2^n x 2^n`` unitaries.

    Each step moves along the Euclidean gradient and retracts with the
    polar decomposition, ``U <- polar(U + s G)``. Because the objective is
    a convex quadratic in ``U``, every such step is non-decreasing; the
    step is still checked and shrunk if round-off makes it decrease.
    """
    states = _check_states(states, book.n)
    if book.n > MAX_QUBITS:
        raise ParameterError(f"at most {MAX_QUBITS} qubits are supported")
    d = 2**book.n
    proj = book.projector_diagonals()
    rng = np.random.default_rng(seed)
    starts = [np.eye(d, dtype=complex)]
    if init is not None:
        starts.append(np.asarray(init, dtype=complex))
    while len(starts) < restarts:
        starts.append(stats.unitary_group.rvs(d, random_state=rng))
    U = np.stack(starts[:max(restarts, 1)])
    J = _success(U, states, proj)
    step = np.ones(len(U))
    stall = np.zeros(len(U), dtype=int)
    active = np.ones(len(U), dtype=bool)
    it = 0
    for it in range(1, max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        G = unitary_gradient(U[idx], states, proj)
        cand = _polar(U[idx] + step[idx, None, None] * G)
        J_new = _success(cand, states, proj)
        ok = J_new >= J[idx] - 1e-15
        gain = np.where(ok, J_new - J[idx], 0.0)
        U[idx[ok]] = cand[ok]
        J[idx[ok]] = J_new[ok]
        step[idx] = np.where(ok, np.minimum(step[idx] * 2, 1e8), step[idx] / 4)
        stall[idx] = np.where(ok & (gain < tol), stall[idx] + 1, 0)
        active[idx] = stall[idx] < 10
    best = int(np.argmax(J))
    converged = not active[best]
    return TrainResult(params=U[best], J=float(_success(U[best], states, proj)),
                       restarts=len(U), iterations=it, converged=bool(converged),
                       restart_values=J.copy())


def riemannian_gradient_norm(U, states, book):
    G = unitary_gradient(np.asarray(U)[None], states, book.projector_diagonals())[0]
    skew = G @ U.conj().T
    skew = 0.5 * (skew - skew.conj().T)
    return float(np.linalg.norm(skew))


# --- pipelines ------------------------------------------------------------

def decode_error(rmpn, channel, book, decoder="unitary", noise=None, jc_cfg=None,
                 train_opts=None, return_details=False):
    """End-to-end ``1 - J`` for BPSK codewords at received photon number ``rmpn``.

    ``decoder`` is ``"unitary"`` or the number of ansatz layers. Training
    is noise-free; ``noise`` applies at evaluation only.
    """
    from .jc import transduce_bpsk

    pair = transduce_bpsk(math.sqrt(rmpn), channel, jc_cfg)
    states = codeword_states(book, pair)
    opts = dict(train_opts or {})
    if decoder == "unitary":
        result = optimize_unitary(states, book, **opts)
    else:
        layout = make_layout(book.n, int(decoder), opts.pop("topology", "auto"))
        result = train(states, book, layout, **opts)
    J = cost(result.decoder(), states, book, noise) if noise else result.J
    if return_details:
        return {"error": 1.0 - J, "J": J, "pair": pair, "result": result, "states": states}
    return 1.0 - J


# --- estimator interface --------------------------------------------------

class _DecoderBase(ClassifierMixin, BaseEstimator):
    """Shared fit/predict plumbing. ``X`` is a stack of ``2^n x 2^n`` density
    matrices; ``y`` holds the codeword label of each state."""

    def _setup(self, X, y):
        X = np.asarray(X, dtype=complex)
        if X.ndim != 3 or X.shape[1] != X.shape[2]:
            raise ParameterError("X must be a stack of square density matrices")
        n = n_qubits_of(X.shape[1])
        y = np.asarray(y)
        if len(y) != len(X):
            raise ParameterError("X and y have different lengths")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ParameterError("at least two classes are required")
        m = math.ceil(math.log2(len(self.classes_)))
        if m > n:
            raise ParameterError("too many classes for the register size")
        self.n_qubits_ = n
        self.measured_qubits_ = tuple(range(m))
        proj_book = Codebook(
            n=n,
            codewords=tuple(_bits(i, n) for i in range(len(self.classes_))),
            output_map=tuple(_bits(i, m) for i in range(len(self.classes_))),
            measured_qubits=self.measured_qubits_,
        )
        masks = proj_book.projector_diagonals()
        return X, encoded, _SampleBook(n, self.measured_qubits_, masks[encoded], encoded)

    def predict_proba(self, X):
        check_is_fitted(self, "unitary_")
        X = np.asarray(X, dtype=complex)
        noise = self.noise or NoiseModel()
        rows = []
        for rho in X:
            out = self._run(rho, noise)
            dist = measurement_distribution(out, self.measured_qubits_, noise.pm)
            rows.append(dist[: len(self.classes_)])
        return np.array(rows)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def score(self, X, y, sample_weight=None):
        """Average probability of the correct outcome (the objective ``J``)."""
        proba = self.predict_proba(X)
        idx = np.searchsorted(self.classes_, np.asarray(y))
        return float(np.average(proba[np.arange(len(idx)), idx], weights=sample_weight))


@dataclass(frozen=True)
class _SampleBook:
    """Codebook-like view allowing repeated labels, used by the estimators."""

    n: int
    measured_qubits: tuple
    masks: np.ndarray
    labels: np.ndarray

    @property
    def M(self):
        return len(self.labels)

    def projector_diagonals(self):
        return self.masks


class VariationalDecoder(_DecoderBase):
    """Layered CNOT-ansatz decoder trained to maximize the average success probability.

    Parameters
    ----------
    layers : int
        Number of ansatz layers.
    topology : {"auto", "chain", "cycle"}
    restarts, max_iter, tol, learning_rate :
        Optimizer settings, see ``train``.
    noise : NoiseModel, optional
        Applied when predicting; training is always noise-free.
    random_state : int
    """

    def __init__(self, layers=3, topology="auto", restarts=16, max_iter=2000, tol=1e-9,
                 learning_rate=0.05, noise=None, random_state=0):
        self.layers = layers
        self.topology = topology
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.learning_rate = learning_rate
        self.noise = noise
        self.random_state = random_state

    def fit(self, X, y):
        X, _, book = self._setup(X, y)
        self.layout_ = make_layout(self.n_qubits_, self.layers, self.topology)
        self.result_ = train(X, book, self.layout_, restarts=self.restarts,
                             max_iters=self.max_iter, tol=self.tol, seed=self.random_state,
                             learning_rate=self.learning_rate)
        self.theta_ = self.result_.params
        self.unitary_ = circuit_unitary(self.layout_, self.theta_)
        return self

    def _run(self, rho, noise):
        if noise.p1 or noise.p2:
            return run_circuit(rho, self.layout_, self.theta_, noise)
        return self.unitary_ @ rho @ self.unitary_.conj().T


class UnitaryDecoder(_DecoderBase):
    """Decoder optimized over the full unitary group (no circuit structure)."""

    def __init__(self, restarts=8, max_iter=2000, tol=1e-12, noise=None, random_state=0):
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.noise = noise
        self.random_state = random_state

    def fit(self, X, y):
        X, _, book = self._setup(X, y)
        self.result_ = optimize_unitary(X, book, restarts=self.restarts,
                                        max_iters=self.max_iter, tol=self.tol,
                                        seed=self.random_state)
        self.unitary_ = self.result_.params
        return self

    def _run(self, rho, noise):
        return self.unitary_ @ rho @ self.unitary_.conj().T
