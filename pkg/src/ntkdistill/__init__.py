"""Desk-scale laboratory for knowledge distillation of linearized wide networks.

The package splits into small, composable layers:

* :mod:`~ntkdistill.linalg` — jittered SPD solves, kernel inner products, angles;
* :mod:`~ntkdistill.network` — NTK-parameterized ReLU stacks, exact parameter
  gradients, linearized-model evaluation and training;
* :mod:`~ntkdistill.kernel` — the analytic arc-cosine tangent kernel and its
  finite-width empirical Gram;
* :mod:`~ntkdistill.distillation` — the two-term distillation loss and its
  converged per-sample targets;
* :mod:`~ntkdistill.tasks` — synthetic targets (Gaussian mixtures, flip noise,
  teacher networks) and the shared input law;
* :mod:`~ntkdistill.metrics` — weight-change norms, data inefficiency, angle
  distributions, transfer risk and its bound, power-law fits;
* :mod:`~ntkdistill.hardlabel` — imperfect-teacher corrections;
* :mod:`~ntkdistill.experiments` / :mod:`~ntkdistill.cli` — the seeded,
  config-driven experiment runner.
"""

__version__ = "0.1.0"

from .distillation import (
    DistillParams,
    correction_logit,
    distill_loss,
    effective_logit,
    effective_logit_closed_t1,
    effective_logits,
    label_smoothing_logit,
    loss_gradient,
    saturated_effective_logits,
)
from .kernel import (
    analytic_ntk,
    analytic_ntk_diag,
    analytic_ntk_gram,
    empirical_kernel,
    empirical_ntk_diag,
    empirical_ntk_gram,
)
from .linalg import (
    DegenerateVectorError,
    KernelMatrix,
    SingularKernelError,
    acute_angle,
    kernel_inner,
    spd_solve,
)
from .metrics import (
    AngleCurve,
    InefficiencyCurve,
    alpha_n,
    angle_distribution,
    data_inefficiency,
    empirical_risk,
    fit_power_law,
    risk_bound,
    weight_change_norm,
)
from .network import (
    Checkpoint,
    NetConfig,
    TrainConfig,
    feature,
    feature_dot,
    features,
    forward,
    init_params,
    linear_logit,
    load_checkpoint,
    param_count,
    save_checkpoint,
    train_linearized,
    train_teacher,
    weighted_feature_sum,
)
from .tasks import MixtureSpec, Task, TaskSpec, mixture_value, realize_mixture, sample_inputs
