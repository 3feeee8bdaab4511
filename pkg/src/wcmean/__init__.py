"""Worst-case optimal mean estimation for randomized data-collection processes."""

__version__ = "0.1.0"

from .baselines import (
    BASELINES,
    GroupStructure,
    baseline_estimator,
    reweighting_estimator,
    sample_mean_estimator,
    selective_prediction_estimator,
    subgroup_estimator,
)
from .collectors import gen_importance, gen_selective, gen_snowball, load_distribution
from .core import (
    L2,
    LINF,
    DataValues,
    IndexPair,
    LossMatrix,
    SampleTargetDistribution,
    SchemaError,
    SemilinearEstimator,
    SupportError,
    build_loss_matrix,
    estimator_from_dense,
    evaluate_pointwise,
    fixed_data_error,
    load_distribution_file,
    load_estimator_file,
    save_distribution_file,
    save_estimator_file,
    target_vector,
    validate_estimator,
)
from .experiments import EXPERIMENTS, ExperimentResult, run_experiment
from .lowerbound import (
    BruteForceSizeError,
    NonExpansionCertificate,
    adversarial_values,
    best_S_bruteforce,
    check_non_expanding,
    semilinear_callable,
)
from .optimizer import (
    BallGeometry,
    InfeasibleBallError,
    OgdConfig,
    OgdTrace,
    ball_geometry,
    loss_gradient,
    loss_value,
    minimize_sdp2,
    minimize_sdp_inf,
    ogd_step,
    project_to_ball,
    radius_for,
    run_with_doubling,
    uniform_init,
)
from .subproblems import (
    EigenResult,
    PsdAssignment,
    SdpConvergenceError,
    round_sign,
    sdp2_value,
    sdp_inf_solve,
    top_eigen,
)
