"""Exact system-environment dynamics from pairs of stochastic product states.

Each trajectory carries two separable states ``|Phi_i> (x) |chi_i>`` driven by
correlated complex noise; the ensemble average of ``|Psi_1><Psi_2|`` follows
the exact unitary evolution.  Four noise schemes trade off simplicity
against the growth of statistical fluctuations:

* ``sse``  -- plain real noise on both factors;
* ``osse`` -- noise rescaled and rotated at every step to minimise growth;
* ``smf``  -- mean-field drift with noise on the centred operators;
* ``osmf`` -- mean-field drift plus the adaptive noise transform.

Quick start::

    from pairjump import SpinStarModel, IntegrationParams, run_ensemble
    stats = run_ensemble(SpinStarModel(1, 0.5), "osmf", 10_000,
                         IntegrationParams.from_tmax(0.01, 3.0), master_seed=1)
"""

__version__ = "0.1.0"

from .ensemble import (EnsembleError, EnsembleStatistics, FitResult, fit_growth_rate,
                       occupation_probability, reconstruct_system_density, run_ensemble)
from .kernels import BACKEND
from .linalg import DeadTrajectoryError, DimensionError
from .model import (Channel, DyadicPair, InteractionHamiltonian, ProductState, SpinStarModel,
                    assemble_total_hamiltonian, build_spin_star, initial_state)
from .oracle import ExactSolution, analytic_occupation, exact_evolve, spin_star_occupation
from .propagator import (BatchPropagator, IntegrationParams, PairTrajectory, propagate_pair,
                         smf_step, sse_step)
from .stochastic import (NoiseSample, NoiseTransform, Scheme, optimal_phase_factor,
                         optimal_scaling_factor, predicted_norm_growth)

__all__ = [
    "BACKEND", "BatchPropagator", "Channel", "DeadTrajectoryError", "DimensionError",
    "DyadicPair", "EnsembleError", "EnsembleStatistics", "ExactSolution", "FitResult",
    "IntegrationParams", "InteractionHamiltonian", "NoiseSample", "NoiseTransform",
    "PairTrajectory", "ProductState", "Scheme", "SpinStarModel", "analytic_occupation",
    "assemble_total_hamiltonian", "build_spin_star", "exact_evolve", "fit_growth_rate",
    "initial_state", "occupation_probability", "optimal_phase_factor",
    "optimal_scaling_factor", "predicted_norm_growth", "propagate_pair",
    "reconstruct_system_density", "run_ensemble", "smf_step", "spin_star_occupation",
    "sse_step",
]
