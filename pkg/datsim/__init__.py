"""Desk-scale simulator for distributed adversarial training"""
# only import elements from the core and runtime packages
from datsim.core import LayeredParams, SeededRng
from datsim.runtime import ClusterConfig, ClusterRuntime, run_training_block

from ._version import __version__
