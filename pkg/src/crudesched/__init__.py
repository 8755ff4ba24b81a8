"""Crude-oil scheduling toolkit: instance model, fast schedule simulator,
and a dual-stage evolutionary solver with rule-guided initialization."""

from .engine import KERNEL_COMPILED
from .model import (
    EncodingError,
    Instance,
    InstanceError,
    bundled_instance_path,
    decode_genome,
    encode_decisions,
    genome_bounds,
    genome_dimension,
    load_instance,
    parse_instance,
    plan_genome,
    save_instance,
)
from .simulate import (
    Evaluator,
    Fitness,
    Trajectory,
    Violation,
    better,
    compare_fitness,
    count_changeovers,
    evaluate,
    simulate,
)
from .solver import (
    VARIANTS,
    AggregateStats,
    RunReport,
    SolveSettings,
    aggregate,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_COMPILED",
    "EncodingError", "Instance", "InstanceError", "bundled_instance_path",
    "decode_genome", "encode_decisions", "genome_bounds", "genome_dimension",
    "load_instance", "parse_instance", "plan_genome", "save_instance",
    "Evaluator", "Fitness", "Trajectory", "Violation", "better",
    "compare_fitness", "count_changeovers", "evaluate", "simulate",
    "VARIANTS", "AggregateStats", "RunReport", "SolveSettings", "aggregate",
    "solve",
    "__version__",
]
