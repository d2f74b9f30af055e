"""Stop-line detection tooling on ego-centred bird's-eye grid maps."""
__version__ = "0.1.0"

from stopline.grid_map import ChannelId, GridGeometry, GridMap, read_gmap, write_gmap  # noqa: E402
from stopline.sparse_lines import StopLine, extract_stop_lines, refine_lines  # noqa: E402
from stopline.target_maps import SegMask, direction_map, signed_distance_map  # noqa: E402

__all__ = [
    "__version__",
    "ChannelId",
    "GridGeometry",
    "GridMap",
    "SegMask",
    "StopLine",
    "direction_map",
    "extract_stop_lines",
    "read_gmap",
    "refine_lines",
    "signed_distance_map",
    "write_gmap",
]
