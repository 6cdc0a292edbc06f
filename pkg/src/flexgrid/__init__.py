"""Self-repairing multi-dimensional grid index and benchmark harness."""

from .core import GridIndex, GridLayout, IndexStats, QueryBox, Vector, as_vector
from .oracle import NaiveStore
from .repartition import RepartitionEvent, Repartitioner, Thresholds
from .tuner import (
    PartitionSpec,
    cost_model_refine,
    equal_depth_boundaries,
    heuristic_spec,
)
from .variants import (
    DELTA_BUFFER,
    FLEXFLOOD,
    UPDATABLE_FLOOD,
    DeltaBufferVariant,
    FlexVariant,
    StaticVariant,
    make_variant,
)
from .workload import (
    WorkloadSpec,
    gen_initial,
    gen_trace,
    ingest_csv,
    read_trace,
    replay,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "GridIndex", "GridLayout", "IndexStats", "QueryBox", "Vector", "as_vector",
    "NaiveStore",
    "RepartitionEvent", "Repartitioner", "Thresholds",
    "PartitionSpec", "cost_model_refine", "equal_depth_boundaries", "heuristic_spec",
    "DELTA_BUFFER", "FLEXFLOOD", "UPDATABLE_FLOOD",
    "DeltaBufferVariant", "FlexVariant", "StaticVariant", "make_variant",
    "WorkloadSpec", "gen_initial", "gen_trace", "ingest_csv",
    "read_trace", "replay", "write_trace",
    "__version__",
]
