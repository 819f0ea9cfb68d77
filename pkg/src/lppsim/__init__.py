"""Directed last passage percolation with Exp(1) weights: exact per-sample
geodesics, coalescence geometry, and Monte Carlo experiments."""

from .weights import (
    ArrayField,
    LatticePoint,
    WeightField,
    depth,
    exp_inverse_cdf,
    weight_at,
)
from .core import (
    Geodesic,
    PassageGrid,
    Region,
    brute_force_passage,
    geodesic,
    passage_grid_to_sink,
    path_weight,
    segment_sup_passage,
)
from .geometry import (
    CoalescenceRecord,
    ParallelFamily,
    coalescence_point,
    crossing_count,
    kbar,
    ktilde,
    ktilde_prime,
    line_crossing,
    line_fluctuation,
    parallel_family,
    precedes,
    transversal_offset,
    two_thirds_floor,
)
from .harness import TrialPlan, run_trials, trial_seed, wilson_interval
from .experiments import (
    ExperimentConfig,
    TailEstimateTable,
    estimate_coalescence_tail,
    estimate_corollary_tail,
    estimate_family_crossings,
    fit_power_law,
    fluctuation_profile,
    onepoint_stats,
    reduction_ratio,
    segment_sup_stats,
)

__version__ = "0.1.0"
