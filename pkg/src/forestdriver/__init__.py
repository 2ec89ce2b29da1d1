"""Deforestation driver classification from satellite imagery.

Modules
-------
raster      raster container, rasterization, zonal statistics, crops, NDVI
ingest      event manifest, driver grouping, temporal filter, split checks
composite   scene filtering, median compositing, inference image choice
augment     training-time transforms and scene sampling
features    auxiliary predictor aggregation and standardization
baselines   classical models with cross-validated tuning
model       segmentation network, losses, fusion head, training, inference
metrics     accuracy / precision / recall / F1 and confusion matrices
"""
from .ingest import DRIVER_CLASSES, DriverClass

__version__ = "0.1.0"

__all__ = ["DRIVER_CLASSES", "DriverClass", "__version__"]
