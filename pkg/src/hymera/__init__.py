"""Numerical laboratory for hyperinvariant tensor networks."""
from .constituents import ParameterSet, build, classify
from .composition import compose, load_decomposition
from .experiments import ExperimentConfig, run_trials, summarize
from .superop import build_ascending, build_descending, kac_dimension, load_cone, scaling_spectrum
from .tensor import Tensor, contract, matricize
from .tiling import InflationGrammar, deflate, inflate, load_grammar, scale_factor

__version__ = "0.1.0"
