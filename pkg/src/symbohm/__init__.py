"""Bohmian mechanics of identical particles on the unordered configuration space.

Modules
-------
group          permutations of N labels, characters of S_N
configuration  ordered and unordered configurations, quotient distance
wavefunction   Gaussian packets, (anti)symmetrized states, periodicity, mass density
guidance       velocity field and trajectory integration
equivariance   sampling from |psi|^2, transport, goodness-of-fit
grid           Crank-Nicolson propagation on 1D and 2D grids
experiments    config-driven experiment runner (also behind the ``symbohm`` command)
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .group import (Permutation, TopologicalFactor, apply_to_configuration, compose, enumerate_characters,
                    enumerate_elements, identity, parity, transposition, verify_unitarity)
from .configuration import UnorderedConfiguration, lifts, ordered, project, quotient_distance
from .wavefunction import (GaussianPacket, ModelParams, WaveFunction, antisymmetrize, check_periodicity,
                           evaluate, gradient, mass_density, product, single, symmetrize)
from .guidance import (Trajectory, crossing_check_1d, integrate_trajectory, lift_independence_check,
                       min_pair_distance, velocity_field)
from .equivariance import (Ensemble, calibrate_thresholds, distribution_distance, sample_density,
                           transport_ensemble)
from .grid import GridSpec, GridState, evolve, init_antisymmetric, init_packet, init_symmetric, step, \
    symmetry_sector_error
from .config import ExperimentConfig, load_config, parse_config
from .experiments import list_experiments, run
