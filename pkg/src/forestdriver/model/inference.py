"""Region-level driver prediction from a trained checkpoint."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..composite import select_inference_image
from ..errors import ShapeError, TruncatedRegion
from ..ingest import DriverClass
from ..raster import RasterImage, center_window, crop, crop_mask, rasterize_polygon


def prepare_input(image: RasterImage, bands, mean, std) -> np.ndarray:
    """Stack and z-score the model bands; nodata pixels become 0."""
    x = image.stack(bands).astype(np.float64)
    mean = np.asarray(mean, dtype=np.float64)[:, None, None]
    std = np.asarray(std, dtype=np.float64)[:, None, None]
    x = (x - mean) / np.where(std > 0, std, 1.0)
    x[:, image.nodata_mask] = 0.0
    return x.astype(np.float32)


def event_mask(event, image: RasterImage):
    """Full-image region mask of an event; may be empty."""
    return rasterize_polygon(event.polygon_rings(), image.width, image.height, allow_empty=True)


def argmax_canonical(scores) -> DriverClass:
    """Highest score; ties go to the earliest class."""
    return DriverClass(int(np.argmax(np.asarray(scores, dtype=np.float64))))


@dataclass
class RegionPrediction:
    event_id: str
    driver: DriverClass
    class_scores: list
    window: tuple
    pixel_classes: np.ndarray | None = None
    true_class: DriverClass | None = None

    def record(self):
        rec = {"event_id": self.event_id, "predicted_class": self.driver.label,
               "class_scores": [float(s) for s in self.class_scores]}
        if self.true_class is not None:
            rec["true_class"] = self.true_class.label
        return rec


class Predictor:
    """Holds a network in eval mode plus the input and aux normalization."""

    def __init__(self, model, bands, band_mean, band_std, aux_transform=None,
                 aggregate="logits"):
        self.model = model
        self.bands = tuple(bands)
        self.band_mean = band_mean
        self.band_std = band_std
        self.aux_transform = aux_transform
        self.aggregate = aggregate

    @classmethod
    def from_checkpoint(cls, ckpt):
        return cls(ckpt.build(), ckpt.bands, ckpt.band_mean, ckpt.band_std, ckpt.aux_transform,
                   ckpt.train_config.aggregate)

    @property
    def dtype(self):
        return next(self.model.parameters()).dtype

    def scores(self, x, mask, aux=None):
        """Class scores and per-pixel classes for one prepared crop."""
        was_training = self.model.training
        self.model.eval()
        try:
            with torch.no_grad():
                xt = torch.from_numpy(x[None]).to(self.dtype)
                mt = torch.from_numpy(np.ascontiguousarray(mask)[None])
                logits = self.model(xt)
                at = None
                if self.model.fusion is not None:
                    if aux is None:
                        raise ShapeError("fusion model needs auxiliary features")
                    a = np.asarray(aux, dtype=np.float64)
                    if self.aux_transform is not None:
                        a = self.aux_transform.transform(a)
                    at = torch.from_numpy(np.atleast_2d(a)).to(self.dtype)
                s = self.model.class_scores(logits, mt, at, aggregate=self.aggregate)
                pixel = logits[0].argmax(dim=0).numpy().astype(np.uint8)
        finally:
            self.model.train(was_training)
        return s[0].double().numpy(), pixel


def predict_region(event, scene_set, predictor: Predictor, aux=None, crop_size=160,
                   image=None) -> RegionPrediction:
    """Classify one event from its inference image, center-cropped.

    Raises :class:`TruncatedRegion` when the crop contains no region pixel.
    """
    if image is None:
        image = select_inference_image(scene_set, event.loss_year)
    window = center_window(image.width, image.height, crop_size)
    mask = crop_mask(event_mask(event, image), window)
    if mask.pixel_count == 0:
        raise TruncatedRegion(f"event {event.event_id}: region falls outside the center crop")
    x = prepare_input(crop(image, window), predictor.bands, predictor.band_mean,
                      predictor.band_std)
    scores, pixel = predictor.scores(x, mask.inside, aux)
    return RegionPrediction(event.event_id, argmax_canonical(scores), scores.tolist(),
                            (window.x0, window.y0, window.size), pixel, event.driver)
