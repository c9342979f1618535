"""Placement, sleep and lifecycle decisions."""
from .coverage import (Capacity, CoverageResult, HorizonPlan, aggregate_horizon, coverage,
                       greedy_cover, offload, reachability_matrix, reachability_set,
                       select_sleep_depth)
from .ideal import InstanceTooLarge, TinyInstance, export_lp, ideal_schedule
from .policies import (Associate, EcTransition, ServiceTransition, make_policy)
