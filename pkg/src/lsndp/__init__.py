"""Logistics service network design: MILP models, partial Benders decomposition
with product aggregation, and an adaptive meta-algorithm over the aggregation level."""

from .instance import Instance, load_instance, save_instance, validate_instance
from .timegraph import expand
from .generator import GeneratorParams, generate, generate_exact_aggregatable
from .partition import ProductPartition, build_partition_sequence, refine_to_exact
from .metapbd import MetaParams, meta_pbd

__all__ = [
    "Instance", "load_instance", "save_instance", "validate_instance", "expand",
    "GeneratorParams", "generate", "generate_exact_aggregatable",
    "ProductPartition", "build_partition_sequence", "refine_to_exact",
    "MetaParams", "meta_pbd",
]
__version__ = "0.1.0"
