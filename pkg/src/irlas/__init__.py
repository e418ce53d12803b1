"""Topology-guided neural architecture search.

A block architecture is a small DAG of layers.  A linear topology score
over discounted layer features is learned from one expert block by
max-margin inverse reinforcement learning, then added (scaled by a
balance scalar) to accuracy as the reward of a tabular Q-learning search,
or ascended via REINFORCE inside a gradient-based search.
"""

from .arch import (
    ADD,
    AVGPOOL3,
    AVGPOOL5,
    CONCAT,
    DEFAULT_MAX_LEN,
    DWCONV1,
    DWCONV3,
    DWCONV5,
    FULL_POOL,
    IDENTITY,
    MAXPOOL3,
    MAXPOOL5,
    TERMINATE,
    ArchError,
    BlockArch,
    InconsistentTrajectoryError,
    InvalidArchitectureError,
    Layer,
    LayerCode,
    OpCategory,
    OpKind,
    ParseError,
    Trajectory,
    TrajectoryStep,
    arch_from_codes,
    arch_from_obj,
    arch_to_obj,
    canonical_serialize,
    enumerate_blocks,
    from_trajectory,
    legal_codes,
    op_by_name,
    parse_arch,
    successor_free_positions,
    to_dot,
    to_trajectory,
    validate,
)
from .diffsearch import (
    DIFF_CSV_HEADER,
    AlphaCell,
    ArchDistribution,
    DiffResult,
    DiffStep,
    QuadraticTaskLoss,
    UNARY_POOL,
    cell_arch_from_choices,
    cell_edges,
    cell_from_obj,
    cell_to_obj,
    exact_topology_loss_and_grad,
    run_diff_search,
    sample_discrete,
    softmax_probs,
    topology_loss_and_grad,
)
from .evaluate import (
    CachedEvaluator,
    EvalOutcome,
    EvaluationError,
    ExternalEvaluator,
    SurrogateEvaluator,
    SurrogateParams,
    TransportError,
    parallel_window,
    surrogate_accuracy,
)
from .features import (
    FEATURE_DIM,
    FeatureCount,
    cosine_similarity,
    feature_count,
    state_feature,
)
from .mirror import (
    ExpertBlock,
    IrlConfig,
    IrlTrace,
    MirrorWeights,
    expert_feature_expectation,
    expert_library,
    inner_optimal_policy,
    sampled_inner_policy,
    max_margin_step,
    mirror_stimuli,
    residual_variants,
    train_mirror,
    weights_from_obj,
    weights_to_obj,
)
from .qsearch import (
    CSV_HEADER,
    START,
    QTable,
    ReplayBuffer,
    ScoredArch,
    SearchConfig,
    SearchResult,
    combined_reward,
    episode_transitions,
    epsilon_at,
    legal_actions,
    run_search,
    sample_block,
    shaped_rewards,
    td_update,
)

__version__ = "0.1.0"
