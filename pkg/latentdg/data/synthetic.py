"""
Synthetic multi-domain shape images.

Each category is a geometric shape and each domain is a rendering style, so
shape carries the category and style carries the (hidden) domain.
"""

import dataclasses
import logging
import math
from typing import Tuple

import numpy as np
from PIL import Image, ImageColor, ImageDraw

from latentdg.utils import check_random_state

logger = logging.getLogger(__name__)

SHAPES = ('circle', 'triangle', 'square', 'cross', 'star', 'ring')
RENDER_MODES = ('filled', 'outline', 'textured')
BACKGROUND_MODES = ('solid', 'gradient')

# Shapes are drawn at this multiple of the output size and downsampled.
SUPERSAMPLE = 4


@dataclasses.dataclass(frozen=True)
class DomainStyleSpec:
    """Rendering style of one domain.

    Attributes
    ----------
    name : str
    hue, hue_jitter, saturation, value : float
        Foreground color in HSV, hue jittered uniformly per sample.
    background : tuple of 3 ints
        RGB background color.
    background_mode : str
        'solid' or 'gradient' (darkens towards the bottom edge).
    contrast_gain, contrast_bias : float
        Applied as ``gain * (x - 0.5) + 0.5 + bias``.
    noise_sigma : float
        Standard deviation of additive Gaussian pixel noise.
    render_mode : str
        'filled', 'outline' or 'textured' (filled with sinusoidal stripes).
    line_width : int
        Stroke width in output pixels for outlines.
    """
    name: str
    hue: float = 0.0
    hue_jitter: float = 0.05
    saturation: float = 0.8
    value: float = 0.9
    background: Tuple[int, int, int] = (255, 255, 255)
    background_mode: str = 'solid'
    contrast_gain: float = 1.0
    contrast_bias: float = 0.0
    noise_sigma: float = 0.0
    render_mode: str = 'filled'
    line_width: int = 1

    def validate(self):
        for field in ('hue', 'hue_jitter', 'saturation', 'value'):
            if not 0.0 <= getattr(self, field) <= 1.0:
                raise ValueError('{}.{} must lie in [0, 1]'.format(
                    self.name, field))
        if len(self.background) != 3 or \
                any(not 0 <= c <= 255 for c in self.background):
            raise ValueError('{}.background must be an RGB triple in '
                             '[0, 255]'.format(self.name))
        if self.background_mode not in BACKGROUND_MODES:
            raise ValueError('{}.background_mode must be one of {}'.format(
                self.name, BACKGROUND_MODES))
        if self.render_mode not in RENDER_MODES:
            raise ValueError('{}.render_mode must be one of {}'.format(
                self.name, RENDER_MODES))
        if not self.contrast_gain > 0:
            raise ValueError('{}.contrast_gain must be positive'.format(
                self.name))
        if self.noise_sigma < 0 or self.line_width < 1:
            raise ValueError('{}: noise_sigma must be >= 0 and line_width '
                             '>= 1'.format(self.name))
        return self


STYLE_PRESETS = {
    'photo': DomainStyleSpec(
        'photo', hue=0.08, hue_jitter=0.08, saturation=0.45, value=0.75,
        background=(70, 80, 90), background_mode='gradient',
        noise_sigma=0.06, render_mode='textured'),
    'cartoon': DomainStyleSpec(
        'cartoon', hue=0.6, hue_jitter=0.04, saturation=0.95, value=0.95,
        background=(250, 220, 60), render_mode='filled'),
    'sketch': DomainStyleSpec(
        'sketch', hue=0.0, hue_jitter=0.0, saturation=0.0, value=0.05,
        background=(255, 255, 255), render_mode='outline', line_width=1),
    'painting': DomainStyleSpec(
        'painting', hue=0.33, hue_jitter=0.1, saturation=0.6, value=0.7,
        background=(200, 170, 130), background_mode='gradient',
        contrast_gain=0.8, contrast_bias=0.05, noise_sigma=0.03,
        render_mode='textured', line_width=2),
}

DEFAULT_STYLES = ('photo', 'cartoon', 'sketch', 'painting')


def default_styles(n_domains=3):
    """The first ``n_domains`` presets in photo, cartoon, sketch, painting
    order."""
    if not 1 <= n_domains <= len(DEFAULT_STYLES):
        raise ValueError('n_domains must lie in [1, {}], got {}'.format(
            len(DEFAULT_STYLES), n_domains))
    return [STYLE_PRESETS[name] for name in DEFAULT_STYLES[:n_domains]]


@dataclasses.dataclass(eq=False)
class Sample:
    """One image with its category, hidden domain and stable id.

    ``image`` has shape (3, H, W) with values in [0, 1].
    """
    image: np.ndarray
    category: int
    domain: int
    id: int


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Shape geometry.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _polygon(cx, cy, radii, theta):
    n = len(radii)
    angles = theta + 2 * np.pi * np.arange(n) / n
    return [(cx + r * math.cos(a), cy + r * math.sin(a))
            for r, a in zip(radii, angles)]


def _cross(cx, cy, r, theta):
    w = 0.35 * r
    pts = [(w, r), (w, w), (r, w), (r, -w), (w, -w), (w, -r),
           (-w, -r), (-w, -w), (-r, -w), (-r, w), (-w, w), (-w, r)]
    c, s = math.cos(theta), math.sin(theta)
    return [(cx + x * c - y * s, cy + x * s + y * c) for x, y in pts]


def _draw_shape(draw, shape, cx, cy, r, theta, outline, width):
    """Draws ``shape`` with foreground 255 on an 'L' image."""
    if shape in ('circle', 'ring'):
        outer = [cx - r, cy - r, cx + r, cy + r]
        inner_r = 0.55 * r
        inner = [cx - inner_r, cy - inner_r, cx + inner_r, cy + inner_r]
        if outline:
            draw.ellipse(outer, outline=255, width=width)
            if shape == 'ring':
                draw.ellipse(inner, outline=255, width=width)
        else:
            draw.ellipse(outer, fill=255)
            if shape == 'ring':
                draw.ellipse(inner, fill=0)
        return

    if shape == 'triangle':
        points = _polygon(cx, cy, [r] * 3, theta)
    elif shape == 'square':
        points = _polygon(cx, cy, [r] * 4, theta)
    elif shape == 'cross':
        points = _cross(cx, cy, r, theta)
    elif shape == 'star':
        points = _polygon(cx, cy, [r, 0.45 * r] * 5, theta)
    else:
        raise ValueError('Unknown shape {!r}'.format(shape))

    if outline:
        draw.line(points + [points[0]], fill=255, width=width, joint='curve')
    else:
        draw.polygon(points, fill=255)


def render_mask(shape, image_size, random_state=None, outline=False,
                line_width=1):
    """Anti-aliased coverage mask of one randomly placed shape.

    Position, scale and rotation are drawn from ``random_state``.

    Returns
    -------
    mask : ndarray, (image_size, image_size), values in [0, 1]
    """
    rs = check_random_state(random_state)
    size = image_size * SUPERSAMPLE
    cx, cy = rs.uniform(0.4, 0.6, size=2) * size
    r = rs.uniform(0.24, 0.34) * size
    theta = rs.uniform(0, 2 * np.pi)

    canvas = Image.new('L', (size, size), 0)
    _draw_shape(ImageDraw.Draw(canvas), shape, cx, cy, r, theta, outline,
                line_width * SUPERSAMPLE)
    small = canvas.resize((image_size, image_size), Image.BOX)
    return np.asarray(small, dtype=np.float64) / 255.0


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Styling.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _hsv_to_rgb(hue, saturation, value):
    spec = 'hsv({:.0f}, {:.0f}%, {:.0f}%)'.format(
        (hue % 1.0) * 360, saturation * 100, value * 100)
    return np.array(ImageColor.getrgb(spec), dtype=np.float64) / 255.0


def _background(style, image_size):
    color = np.asarray(style.background, dtype=np.float64) / 255.0
    bg = np.broadcast_to(color[:, None, None], (3, image_size, image_size))
    if style.background_mode == 'gradient':
        ramp = np.linspace(1.0, 0.6, image_size)[None, :, None]
        bg = bg * ramp
    return np.array(bg)


def _stripes(image_size, rs):
    phi = rs.uniform(0, np.pi)
    freq = rs.uniform(0.15, 0.3)
    yy, xx = np.mgrid[0:image_size, 0:image_size]
    proj = xx * math.cos(phi) + yy * math.sin(phi)
    return 0.5 + 0.5 * np.sin(2 * np.pi * freq * proj + rs.uniform(0, 2 * np.pi))


def render_sample(shape, style, image_size=32, random_state=None):
    """Renders one shape under ``style``.

    Returns
    -------
    image : ndarray, (3, image_size, image_size), values in [0, 1]
    """
    rs = check_random_state(random_state)
    mask = render_mask(shape, image_size, rs,
                       outline=style.render_mode == 'outline',
                       line_width=style.line_width)

    hue = style.hue + rs.uniform(-style.hue_jitter, style.hue_jitter)
    color = _hsv_to_rgb(hue, style.saturation, style.value)
    fg = np.broadcast_to(color[:, None, None], (3, image_size, image_size))
    if style.render_mode == 'textured':
        fg = fg * (0.6 + 0.4 * _stripes(image_size, rs))[None]

    image = _background(style, image_size) * (1 - mask) + fg * mask
    image = style.contrast_gain * (image - 0.5) + 0.5 + style.contrast_bias
    if style.noise_sigma > 0:
        image = image + rs.normal(0, style.noise_sigma, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def generate_dataset(styles, num_classes, n_per_domain, image_size=32,
                     seed=None, verbose=False):
    """Renders a class-balanced dataset with one domain per style.

    Parameters
    ----------
    styles : list of DomainStyleSpec or str
        Domain styles in domain-index order; strings name presets.
    num_classes : int
        Number of categories C, using the first C entries of ``SHAPES``.
    n_per_domain : int
        Samples per domain; must be a positive multiple of C.
    image_size : int
    seed : int, RandomState or None
    verbose : bool

    Returns
    -------
    samples : list of Sample
        Ordered by domain, then by sample index; ``id`` is the position.

    Raises
    ------
    ValueError
        If C exceeds the number of shapes, ``n_per_domain`` is not a
        multiple of C, or two styles are identical.
    """
    styles = [STYLE_PRESETS[s] if isinstance(s, str) else s for s in styles]
    if not styles:
        raise ValueError('at least one style is required')
    for style in styles:
        style.validate()
    if len(set(styles)) != len(styles):
        raise ValueError('domain styles must be pairwise distinct')
    if not 1 <= num_classes <= len(SHAPES):
        raise ValueError('num_classes={} is not available; the shape classes '
                         'are {}'.format(num_classes, ', '.join(SHAPES)))
    if n_per_domain < 1 or n_per_domain % num_classes:
        raise ValueError('n_per_domain must be a positive multiple of '
                         'num_classes={}, got {}'.format(num_classes,
                                                         n_per_domain))

    rs = check_random_state(seed)
    samples = []
    for domain, style in enumerate(styles):
        for k in range(n_per_domain):
            category = k % num_classes
            image = render_sample(SHAPES[category], style, image_size, rs)
            samples.append(Sample(image, category, domain, len(samples)))
        if verbose:
            logger.info('rendered %d %s samples', n_per_domain, style.name)
    return samples


def stack_images(samples):
    """Images of ``samples`` as one (N, 3, H, W) array."""
    if not samples:
        raise ValueError('no samples to stack')
    return np.stack([s.image for s in samples])


def sample_labels(samples):
    """Category and domain vectors of ``samples``."""
    categories = np.array([s.category for s in samples], dtype=np.int64)
    domains = np.array([s.domain for s in samples], dtype=np.int64)
    return categories, domains
