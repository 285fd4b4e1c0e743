"""Spherical-image 3D multi-object tracking for LiDAR sweeps.

Point clouds are projected into a 64x512x4 spherical image, instance masks
are lifted back to 3D centers, and an extended SORT tracker associates
detections with a blend of pixel IoU and 3D center distance.
"""

from pointit.errors import (
    ConfigError,
    FormatError,
    InputError,
    PointitError,
    SequenceError,
    SpecError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FormatError",
    "InputError",
    "PointitError",
    "SequenceError",
    "SpecError",
]
