"""k-anonymous homogeneous origin-destination matrices over hexagonal hierarchies."""

__version__ = "0.1.0"

from .baselines import MondrianResult, OighResult, mondrian, oigh
from .generalize import GeneralizationResult, anonymize, select_axis
from .hexgrid import CellId, ExternalHierarchy, SyntheticHierarchy, load_parent_map
from .model import Mode, SparseOD, TripDataset, TripRecord, build_od, effective_k, load_trips, segment
from .suppress import SuppressionConfig, prefilter
from .treebuild import CountTree, build_tree

__all__ = [
    "CellId",
    "CountTree",
    "ExternalHierarchy",
    "GeneralizationResult",
    "Mode",
    "MondrianResult",
    "OighResult",
    "SparseOD",
    "SuppressionConfig",
    "SyntheticHierarchy",
    "TripDataset",
    "TripRecord",
    "anonymize",
    "build_od",
    "build_tree",
    "effective_k",
    "load_parent_map",
    "load_trips",
    "mondrian",
    "oigh",
    "prefilter",
    "segment",
    "select_axis",
]
