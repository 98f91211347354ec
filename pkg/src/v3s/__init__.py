"""Spatial and temporal video transformations with automatic pretext labels."""
from .geometry import Homography, Point2, Quad, invert, map_point, solve_homography
from .pretext import TaskCatalog, default_catalog, build_dataset, generate_sample
from .synthgen import ShapeScene, measure_extent, measure_motion, render
from .temporal import TemporalSpec
from .warp import SpatialSpec, apply_spatial, warp_frame

__version__ = "0.1.0"
