"""
Training-time augmentation: random resized crop, horizontal flip, color
jitter and per-channel standardization.
"""

import dataclasses
from typing import Tuple

import numpy as np
from scipy import ndimage

from latentdg.utils import check_random_state


@dataclasses.dataclass
class AugmentConfig:
    crop: bool = True
    crop_scale: Tuple[float, float] = (0.8, 1.0)
    crop_ratio: Tuple[float, float] = (3.0 / 4.0, 4.0 / 3.0)
    flip: bool = True
    flip_prob: float = 0.5
    jitter: bool = True
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    mean: Tuple[float, float, float] = (0.5, 0.5, 0.5)
    std: Tuple[float, float, float] = (0.25, 0.25, 0.25)

    def validate(self):
        lo, hi = self.crop_scale
        if not 0 < lo <= hi <= 1:
            raise ValueError('crop_scale must satisfy 0 < lo <= hi <= 1')
        if not 0 < self.crop_ratio[0] <= self.crop_ratio[1]:
            raise ValueError('crop_ratio must satisfy 0 < lo <= hi')
        if not 0 <= self.flip_prob <= 1:
            raise ValueError('flip_prob must lie in [0, 1]')
        for name in ('brightness', 'contrast', 'saturation'):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError('{} must lie in [0, 1)'.format(name))
        if any(s <= 0 for s in self.std):
            raise ValueError('std must be positive')
        return self


def _channel_stats(config):
    mean = np.asarray(config.mean, dtype=np.float64)[:, None, None]
    std = np.asarray(config.std, dtype=np.float64)[:, None, None]
    return mean, std


def standardize(image, config=None):
    """``(image - mean) / std`` per channel with fixed statistics."""
    mean, std = _channel_stats(config or AugmentConfig())
    return (image - mean) / std


def unstandardize(image, config=None):
    mean, std = _channel_stats(config or AugmentConfig())
    return image * std + mean


def random_resized_crop(image, random_state=None, scale=(0.8, 1.0),
                        ratio=(3.0 / 4.0, 4.0 / 3.0)):
    """Crops a random box and resamples it bilinearly to the input size.

    The box covers a fraction of the area drawn from ``scale`` with a
    log-uniform aspect ratio from ``ratio``.
    """
    rs = check_random_state(random_state)
    _, H, W = image.shape
    area = rs.uniform(*scale) * H * W
    aspect = np.exp(rs.uniform(np.log(ratio[0]), np.log(ratio[1])))
    w = min(np.sqrt(area * aspect), W)
    h = min(np.sqrt(area / aspect), H)
    x0 = rs.uniform(0, W - w)
    y0 = rs.uniform(0, H - h)

    ys = y0 + (np.arange(H) + 0.5) * h / H - 0.5
    xs = x0 + (np.arange(W) + 0.5) * w / W - 0.5
    grid = np.meshgrid(ys, xs, indexing='ij')
    return np.stack([
        ndimage.map_coordinates(channel, grid, order=1, mode='nearest')
        for channel in image])


def _grayscale(image):
    return 0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2]


def color_jitter(image, random_state=None, brightness=0.2, contrast=0.2,
                 saturation=0.2, clamp=True):
    """Brightness, contrast and saturation jitter, applied in that order.

    Each factor is drawn from ``[1 - s, 1 + s]``. Intermediate results are
    clamped to [0, 1]; for inputs in [0, 1] the unclamped output lies in
    ``[-s, 1 + s]``.
    """
    rs = check_random_state(random_state)
    out = image * rs.uniform(1 - brightness, 1 + brightness)
    out = np.clip(out, 0.0, 1.0)

    f = rs.uniform(1 - contrast, 1 + contrast)
    out = np.clip(_grayscale(out).mean() + f * (out - _grayscale(out).mean()),
                  0.0, 1.0)

    f = rs.uniform(1 - saturation, 1 + saturation)
    gray = _grayscale(out)[None]
    out = gray + f * (out - gray)
    return np.clip(out, 0.0, 1.0) if clamp else out


def augment(image, random_state=None, config=None):
    """Augments one (3, H, W) image in [0, 1] and standardizes it.

    Deterministic given ``random_state``. Labels are untouched since only
    the pixels are passed in.
    """
    config = config or AugmentConfig()
    rs = check_random_state(random_state)
    out = image
    if config.crop:
        out = random_resized_crop(out, rs, config.crop_scale,
                                  config.crop_ratio)
    if config.flip and rs.uniform() < config.flip_prob:
        out = out[:, :, ::-1]
    if config.jitter:
        out = color_jitter(out, rs, config.brightness, config.contrast,
                           config.saturation)
    return standardize(np.clip(out, 0.0, 1.0), config)


def augment_batch(images, random_state=None, config=None):
    """Applies ``augment`` to every image of an (N, 3, H, W) batch."""
    rs = check_random_state(random_state)
    return np.stack([augment(img, rs, config) for img in images])
