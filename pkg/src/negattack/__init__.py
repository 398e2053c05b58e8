"""Negative-direction adversarial examples and the classic attacks they mirror.

Small numpy classifiers with exact input gradients, the seven gradient
attacks, IDX ingestion, and an evaluation harness for transfer matrices and
hyperparameter sweeps.
"""

from .attacks import (
    NEW_TYPE_METHODS,
    AttackConfig,
    AttackResult,
    GradientAttack,
    Method,
    MomentumState,
    Termination,
    fgm,
    fgsm,
    i_fgsm,
    ni_fgm,
    ni_fgsm,
    nmi_fgm,
    nmi_fgsm,
    run_attack,
    update_momentum,
)
from .classifier import ModelFormatError, NetClassifier, load_model, save_model
from .dataio import (
    Dataset,
    EvalSubset,
    FormatError,
    InsufficientPoolError,
    export_image,
    load_idx,
    model_fingerprint,
    select_eval_subset,
    write_csv,
)
from .harness import (
    AttackFailure,
    FingerprintMismatch,
    Mode,
    SuccessCriterion,
    SweepResult,
    TransferMatrix,
    render_report,
    success_rate,
    sweep_decay,
    sweep_iterations,
    sweep_perturbation,
    transfer_matrix,
)
from .network import ModelSpec
from .tensor import Norm

__version__ = "0.1.0"
