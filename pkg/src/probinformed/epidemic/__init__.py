"""SI epidemic simulation and the analytically solvable chain model."""

from .chain import (
    NO_SEED,
    TAIL,
    ChainParams,
    ChainSpace,
    chain_complement_prob,
    chain_encode,
    chain_event_groups,
    chain_model,
    chain_outcome_prob,
    chain_pi_2f1,
    chain_pi_analytic,
    chain_schedule,
    chain_space,
    chain_truncated_prob,
    enumerate_chain_outcomes,
    hyp2f1_series,
)
from .simulator import (
    SentinelSchedule,
    SIModel,
    Trajectory,
    TrajectoryBatch,
    detect,
    detect_many,
    dump_trajectory,
    model_from_edgelist,
    outcome_id,
    read_edgelist,
    read_schedule,
    simulate,
    simulate_many,
)
