"""Simulation of l-vertex random graph processes and their branching-process limits."""

from .forest import ComponentForest, CycleCensus, ForestStats, MergeOutcome
from .rules import RuleContext, RuleDecision, RuleError, RuleSpec, builtin, decide, parse_rule, validate_acyclic
from .engine import ConfigError, RunConfig, Snapshot, StatsSeries, run, run_ensemble, run_poisson

__version__ = "0.1.0"
