"""Idealized exploration branching process and its size-law estimates."""

from .estimate import RhoEstimate, estimate_rho
from .pmf import SizePmf, borel, borel_pmf
from .tree import ExplorationTree, Reconstruction, eval_component, reconstruct, sample_bp
from .stitch import Stage, StitchAborted, StitchResult, er_susceptibility, stitch
from .explore import BadFrequency, FiniteExploration, TupleIndex, explore_finite, hypergraph_components
