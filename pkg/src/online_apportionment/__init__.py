"""Exact online apportionment: greedy and randomized methods, adversaries,
flow-based lotteries and an online covering application."""

from .core import (Instance, TrajectoryState, VoteVector, check_global_quota, max_deviation,
                   surplus)

__all__ = ["Instance", "TrajectoryState", "VoteVector", "check_global_quota", "max_deviation",
           "surplus"]
