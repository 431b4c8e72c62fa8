"""Routines to create, split, augment and load data."""

from .synthetic import (SHAPES, STYLE_PRESETS, DomainStyleSpec, Sample,
                        default_styles, generate_dataset, sample_labels,
                        stack_images)
from .splits import DatasetSplit, make_splits, select
from .augment import AugmentConfig, augment_batch, standardize
from .io import export_image_folder, load_image_folder
