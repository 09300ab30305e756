"""Bloom-filter coding over OR multiple-access and many-access channels."""

from .analysis import (CostBounds, RatePoint, RateRegion, binary_entropy, capacity_membership,
                       conditional_entropy_limit, cost_bounds_ar, cost_bounds_mt,
                       entropy_limit, exact_conditional_entropy, exact_entropy,
                       feasibility_mt, rate_region_point, subset_rates, success_prob_exact,
                       sumrate_threshold, two_phase_q, ar_success_lower_bound, ar_success_exact)
from .bloom import (BloomFilter, HashSpec, WeightPmf, conditional_occupancy_bound, contains,
                    generate, occupancy_bound, stirling2, superpose, weight, weight_pmf)
from .estimators import BloomActivityRecognizer, BloomMACCoder, BloomTwoPhaseTransmitter
from .exceptions import DimensionError, DomainError, ParameterError, ResourceError
from .harness import Summary, TrialRecord, persist, run_sweep, run_trials
from .schemes import (ActivityPattern, Codebook, DecodeOutcome, Scenario, ar_decode, ar_encode,
                      decode_per_user, joint_decode, mt_decode, mt_encode, or_channel,
                      sample_activity)

__version__ = "0.1.0"
