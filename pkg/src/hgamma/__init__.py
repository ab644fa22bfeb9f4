"""Learn a one-parameter subgroup of SO(n) (or SL(n)) together with a function invariant under it."""

from .groups import GroupElement, SubgroupSpec, act, element_at, project_so_n, sample_element
from .invrep import InvRepOutput, canonicalize, inv_rep, inv_rep_any, inv_rep_h, inv_rep_p, orbit_equal_oracle
from .linalg import Family, canonical_action, exp_skew, make_canonical_generator, rot2
from .metrics import RunReport, block_condition_check, cosine_distance, generator_of, invariance_error, lambda_report
from .model import HGammaModel, Mode, TrainConfig, create_model, predict, predict_equivariant, train
from .tasks import Dataset, TaskName, TaskSpec, generate, make_task

__version__ = "0.1.0"
