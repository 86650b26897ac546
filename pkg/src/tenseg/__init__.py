"""Tensegrity form-finding, modal analysis and neural-network surrogates."""

__version__ = "0.1.0"

from .dataset import Dataset, SamplingSpec, generate, split  # noqa: E402
from .modal import ModalResult, mass_matrix, modal_analysis, tangent_stiffness  # noqa: E402
from .statics import (  # noqa: E402
    EquilibriumState,
    LoadCase,
    SolverConfig,
    equilibrium_matrix,
    force_density,
    form_find,
    potential_energy,
    stiffness_matrix,
    unbalanced_force,
)
from .surrogate import EvalReport, MlpModel, TrainConfig, evaluate, run_trials, train  # noqa: E402
from .topology import (  # noqa: E402
    MemberSpec,
    Structure,
    generate_dbar,
    generate_lander,
    generate_prism,
    member_geometry,
)
