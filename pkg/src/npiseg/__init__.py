"""Interactive multi-object 3D point-cloud segmentation, desk scale."""

__version__ = "0.1.0"
