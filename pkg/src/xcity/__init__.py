"""Road-asset layout synthesis for autonomous-vehicle proving grounds.

Road assets (rigid road graphs) are selected and placed into a convex space
so that no two assets' roads cross, then rearranged to maximize the number
of asset pairs joinable by a straight transition road.
"""

from .assets import Placement, Pose, RoadAsset, apply_pose, boundary_nodes, simplify_nodes, validate_asset
from .constraints import count_constraints, feasibility_report
from .geometry import Point2, Segment2, Space, intersection_test, orientation, segments_disjoint
from .phase1 import SearchConfig, search_placement, select_subset
from .phase2 import direct_connectivity, optimize_connectivity

__version__ = "0.1.0"

__all__ = [
    "Placement",
    "Point2",
    "Pose",
    "RoadAsset",
    "SearchConfig",
    "Segment2",
    "Space",
    "apply_pose",
    "boundary_nodes",
    "count_constraints",
    "direct_connectivity",
    "feasibility_report",
    "intersection_test",
    "optimize_connectivity",
    "orientation",
    "search_placement",
    "segments_disjoint",
    "select_subset",
    "simplify_nodes",
    "validate_asset",
]
