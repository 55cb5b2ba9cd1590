"""Two interacting particles hopping on a 1D lattice with long-range interaction.

Exact two-particle Schroedinger dynamics, the relative-motion spectral problem
(bound pairs and scattering phase shifts), semiclassical equations of motion
with self-induced Bloch oscillations, and an experiment CLI.
"""

from .model import (
    HubbardParams,
    InteractionPotential,
    LatticeSpec,
    TwoParticleState,
    apply_hamiltonian,
    build_potential,
    gaussian_packet,
    symmetrize,
)
from .dynamics import EvolutionRecord, PropagatorConfig, dense_evolve, evolve
from .observables import (
    MarginalDistribution,
    ObservableSeries,
    ehrenfest_check,
    marginals,
    mean_positions,
    momentum_distribution,
    velocity_expectations,
)
from .semiclassics import (
    ForceModel,
    SemiclassicalState,
    bloch_period,
    closed_form_bloch,
    integrate,
    interaction_force,
)
from .spectral import (
    BoundState,
    RelativeProblem,
    ScatteringSolution,
    doublon_band_sweep,
    relative_hamiltonian,
    relative_problem,
    scattering_phase_shift,
    solve_bound_states,
)

__version__ = "0.1.0"
