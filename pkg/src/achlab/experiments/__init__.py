"""Desk-scale experiments with recomputable pass/fail verdicts."""

from .cycles import cycle_check, exploration_check
from .delayed import delayed_percolation
from .limits import FitError, TailFit, compare_rho, envelope_constant, tail_fit, total_variation
from .report import FAIL, OPEN, PASS, VERDICTS, ExperimentReport
from .scaling import concentration_check, detect_blowup, measure_grid, scan_l1
