"""Independent subspace analysis by ICA followed by greedy grouping of the
ICA coordinates under a joint f-decorrelation cost."""

from .datagen import RhoSpec, gen_a_omega, gen_d_spherical, load_glyphs, make_observation
from .experiment import ExperimentSpec, emit_plot_data, run_experiment
from .fcov import FunctionSet, cost_q, cost_q_theta, f_covariance, make_mask, phi_c
from .ica import IcaResult, fastica
from .metrics import amari_index, power_law_fit
from .model import (
    BlockStructure,
    apply_whitening,
    fit_whitening,
    mix,
    random_orthogonal,
    random_unitary,
)
from .permsearch import (
    PermutationMap,
    estimate_isa,
    estimate_isa_given_w,
    exhaustive_permutation,
    greedy_permutation,
)

__version__ = "0.1.0"
