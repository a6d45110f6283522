from .firefly import FaParams, Firefly, OptimizerError, firefly_optimize
from .nsga2 import Nsga2Params, crowding_distance, dominates, fast_nondominated_sort, nsga2
from .topsis import DegenerateCriterionError, topsis

__all__ = [
    "FaParams",
    "Firefly",
    "OptimizerError",
    "firefly_optimize",
    "Nsga2Params",
    "crowding_distance",
    "dominates",
    "fast_nondominated_sort",
    "nsga2",
    "DegenerateCriterionError",
    "topsis",
]
