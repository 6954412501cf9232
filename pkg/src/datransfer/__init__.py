"""Weak-coupling dynamics of degenerate donor-acceptor systems in a thermal bath."""

from .model import (SystemParams, EffectiveSystem, ProjectionSet, build_hamiltonian,
                    effective_reduction, build_projections, gibbs_effective)
from .spectral import SpectralModel, QuadSettings, eval_J, j_tilde_zero, mu_integral, pv_lamb_shift, weight_w1
from .resonances import ResonanceSet, compute_resonances
from .dynamics import PropagatorContext, propagate, asymptotic_state, donor_element
from .observables import (InitialDistribution, EfficiencyReport, make_initial_state, efficiency_incoherent,
                          efficiency_coherent, alpha_of_eta, population_timeseries, fluctuation_variance)

__version__ = "0.1.0"
