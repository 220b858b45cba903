"""
Services module: numerical engines for stable laws, random environments and their functionals
"""

from .stable_core import StableLaw, Spectral, NormingFunctions, cf_stable, sample_stable, sample_stable_path, norming_eval
from .cadlag import CadlagGrid
from .environment import Environment, StepModel, build_environment, potential_at, env_to_omega, omega_to_env
from .mittag_leffler import LimitLawSpec, mittag_leffler, rho1, rho2, laplace_xi, invert_laplace_cdf
from .diffusion_quenched import quenched_hitting_time, sample_xi
from .rwre import WalkStats, rwre_trajectory, annealed_sup_distribution, envelope_diagnostic

__all__ = [
    'StableLaw',
    'Spectral',
    'NormingFunctions',
    'cf_stable',
    'sample_stable',
    'sample_stable_path',
    'norming_eval',
    'CadlagGrid',
    'Environment',
    'StepModel',
    'build_environment',
    'potential_at',
    'env_to_omega',
    'omega_to_env',
    'LimitLawSpec',
    'mittag_leffler',
    'rho1',
    'rho2',
    'laplace_xi',
    'invert_laplace_cdf',
    'quenched_hitting_time',
    'sample_xi',
    'WalkStats',
    'rwre_trajectory',
    'annealed_sup_distribution',
    'envelope_diagnostic'
]
