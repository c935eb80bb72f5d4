"""Simulation of a qubit-based joint detection receiver for BPSK optical pulses.

An optical pulse is transduced to a microwave mode, swapped into a qubit
by Jaynes-Cummings evolution, and codewords of such qubits are decoded
by a trained quantum circuit.
"""

__version__ = "0.1.0"

from ._validation import (
    ConsistencyError,
    ConvergenceError,
    NumericalError,
    ParameterError,
    TruncationError,
)
from .decoder import (
    Circuit,
    Codebook,
    TrainResult,
    UnitaryDecoder,
    VariationalDecoder,
    codeword_states,
    cost,
    cost_gradient,
    decode_error,
    make_codebook,
    optimize_unitary,
    train,
)
from .fock import FockTruncation, displaced_thermal, trace_distance
from .jc import JcConfig, TransducedPair, jc_evolve, optimal_time_reference, transduce_bpsk
from .limits import (
    c1_capacity,
    helstrom_bpsk,
    holevo,
    holevo_bpsk_optical,
    jdr_capacity,
    n_helstrom,
)
from .physmodel import (
    DriveConfig,
    TransducerParams,
    TransductionChannel,
    steady_states,
    transduction_channel,
)
from .qsim import (
    CircuitLayout,
    NoiseModel,
    build_codeword_state,
    make_layout,
    measurement_distribution,
    run_circuit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
