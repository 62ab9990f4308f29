"""Coalitional-game simulator for cooperative secrecy beamforming.

Wireless transmitters in a TDMA network team up to null eavesdroppers by
collaborative beamforming, paying an information-exchange cost, and
self-organize through distributed merge-and-split decisions.
"""

__version__ = "0.1.0"

from .errors import (InfeasibleNulling, InvalidCoalitionSize, MismatchedPlayers,
                     NoPower, ParseError, RoundCapExceeded, SecoalError,
                     TooLargeToVerify, ValidationError, ZeroDistance)
from .formation import (FormationConfig, FormationResult, FormationTrace,
                        StabilityReport, TraceEvent, check_dc_partition,
                        discover_neighbors, dissolve_infeasible,
                        find_dc_partition, is_dhp_stable, merge_pass,
                        run_formation, split_pass)
from .game import (PayoffCache, batch_coalition_payoffs, coalition_payoff,
                   coalition_payoffs, coalition_value, collection_payoffs,
                   pareto_prefers, prefers_collections)
from .geometry import (NetworkState, RadioParams, assign_closest_destination,
                       channel_gain, discovery_radius, exchange_power_cost,
                       make_state, residual_power)
from .partitions import (all_partitions, canonical_coalition,
                         canonical_partition, partitions_into_blocks,
                         singleton_partition)
from .secrecy import (BeamformerResult, af_beamformer, df_beamformer,
                      exchange_secrecy_cost, noncoop_rate, null_basis,
                      slot_secrecy_rate)
from .simulate import (MetricsRecord, MobilityConfig, MobileRun, ScenarioConfig,
                       SweepRow, deploy_random, derive_seed_sequence,
                       evaluate_deployment, run_mobile, sweep)
