"""Sampled-data H-infinity design of fractional delay filters.

The package builds the lifted, finite-dimensional error system of a
sampler / delay / digital filter loop, evaluates its exact H-infinity
norm, and designs FIR filters against it (closed form for a first-order
signal model, grid minimax for general models, and a weighted
least-squares baseline for comparison).
"""

from fdh.errors import (
    ConvergenceError,
    DesignError,
    FdhError,
    InvalidInputError,
    NumericalError,
)
from fdh.statespace import (
    ContinuousStateSpace,
    DiscreteStateSpace,
    GramianResult,
    first_order_lowpass,
    impulse_invariant_discretize,
    matrix_exponential,
    transfer_at,
    van_loan_gramian,
)
from fdh.lifting import (
    DelaySpec,
    LiftedSystem,
    assemble_ed,
    delay_chain,
    lift_error_system,
    psd_factor,
    split_delay,
)
from fdh.design import (
    FirFilter,
    closed_form_hinf,
    closed_form_optimal_norm,
    h2_fir_design,
    ideal_response,
    minimax_fir_design,
)
from fdh.analysis import (
    ErrorSystemReport,
    FrequencyGrid,
    SimulationResult,
    TestSignal,
    filter_frequency_response,
    hinf_norm,
    make_test_signal,
    pointwise_error_gain,
    simulate,
)

__version__ = "0.1.0"
