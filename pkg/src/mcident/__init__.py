"""Identity testing of finite Markov chains from a single trajectory."""
from .chain_sim import (
    Trajectory,
    hitting_time,
    mixing_time,
    sample_trajectory,
    stationary_distribution,
)
from .distance import (
    WordDistanceReport,
    chain_distance,
    hellinger_sq_words,
    minimal_distinguishing_length,
    tv_distinguishing_interval,
    word_distances_bruteforce,
)
from .hard import (
    power_curve,
    sparse_hard_instance,
    symmetric_hard_instance,
    symmetric_hard_instance_at_distance,
)
from .matrix import (
    StochasticMatrix,
    essential_classes,
    geometric_mean,
    has_identical_essential_class,
    spectral_radius,
)
from .profiles import Constants, ThresholdProfile
from .shuffle import (
    ShuffleModel,
    biased_gsr_model,
    build_grid_chain,
    encode_shuffle,
    gsr_model,
    shuffle_once,
)
from .sparse import (
    SparseChain,
    block_cyclic_check,
    chi2_edge_statistic,
    chi2_edge_test,
    dist_rounds_bruteforce,
    edge_probs,
    filter_samples,
    hellinger_sq_rounds,
    prune,
    sample_round,
    sample_rounds,
)
from .symmetric import (
    collect_edge_samples,
    draw_visit_plan,
    flatten_chain,
    iid_identity_test,
    recommended_trajectory_length,
    test_identity_symmetric,
)
from .verdict import Verdict

__version__ = "0.1.0"
