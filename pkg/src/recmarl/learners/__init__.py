from recmarl.learners.config import (
    LearnerConfig,
    LearnerConfigError,
    exact_pg_step,
    td_rdac_lambda,
    td_rdac_step,
    td_step_size,
)
from recmarl.learners.dpg import EstimatorError, PgTrace, exact_estimator, run_dpg_exact, run_dpg_inexact
from recmarl.learners.exchange import LocalityViolation, NeighborExchange
from recmarl.learners.td_rdac import (
    NeighborhoodSlice,
    ValueBoundError,
    ValueTable,
    compute_td_errors,
    estimate_agent_gradient,
    observe,
    publish_rollout,
    regularizer_step,
    td_inner_loop,
    td_rdac,
)
