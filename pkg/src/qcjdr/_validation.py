"""Exception types and input validation helpers shared across the package."""

import numbers

import numpy as np


class ParameterError(ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TruncationError(ValueError):
    """A truncated Fock space is too small for the requested state."""


class NumericalError(RuntimeError):
    """A numerical routine (quadrature, decomposition) failed."""


class ConsistencyError(RuntimeError):
    """A computed quantity violates an internal consistency check."""


HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


def check_positive(name, value, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ParameterError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_probability(name, value):
    value = check_positive(name, value, allow_zero=True)
    if value > 1:
        raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_square(name, mat):
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {mat.shape}")
    return mat


def check_density_matrix(rho, name="rho", trace=1.0, herm_tol=HERMITIAN_TOL,
                         trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    """Validate a density matrix and return it as a complex ndarray.

    Checks Hermiticity (relative to the matrix scale), the trace, and
    that the smallest eigenvalue is not below ``-psd_tol``.
    """
    rho = check_square(name, rho).astype(complex, copy=False)
    scale = max(1.0, float(np.max(np.abs(rho))))
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol * scale:
        raise ParameterError(f"{name} is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - trace) > trace_tol:
        raise ParameterError(f"{name} has trace {tr!r}, expected {trace!r}")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -psd_tol:
        raise ParameterError(f"{name} has negative eigenvalue {lam_min!r}")
    return rho


def n_qubits_of(dim):
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ParameterError(f"dimension {dim} is not a power of two")
    return n
