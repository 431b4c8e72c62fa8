"""
Image-folder export and ingestion.

A folder holds PNG files plus ``manifest.csv`` with the columns
``relative_path,category,domain``. The domain column may be empty or
missing, in which case the domain is recorded as -1.
"""

import csv
import logging
import os

import numpy as np
from PIL import Image

from latentdg.data.synthetic import Sample

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.csv'
COLUMNS = ('relative_path', 'category', 'domain')


def export_image_folder(samples, root):
    """Writes samples as PNG files and a manifest.

    Files are laid out as ``domain<d>/<id>.png``.

    Returns
    -------
    manifest_path : str
    """
    os.makedirs(root, exist_ok=True)
    rows = []
    for s in samples:
        rel = os.path.join('domain{}'.format(s.domain), '{:06d}.png'.format(
            s.id))
        os.makedirs(os.path.join(root, os.path.dirname(rel)), exist_ok=True)
        pixels = np.clip(np.round(s.image * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(pixels.transpose(1, 2, 0), 'RGB').save(
            os.path.join(root, rel))
        rows.append((rel.replace(os.sep, '/'), s.category, s.domain))

    path = os.path.join(root, MANIFEST)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(COLUMNS)
        writer.writerows(rows)
    logger.info('exported %d images to %s', len(rows), root)
    return path


def _parse_category(value, categories, row_number):
    if categories is not None:
        if value in categories:
            return categories.index(value)
        try:
            index = int(value)
        except ValueError:
            index = -1
        if 0 <= index < len(categories):
            return index
        raise ValueError('manifest row {}: unknown category {!r}; expected '
                         'one of {}'.format(row_number, value, categories))
    try:
        index = int(value)
    except ValueError:
        raise ValueError('manifest row {}: category {!r} is not an integer '
                         'and no category names were given'.format(
                             row_number, value))
    if index < 0:
        raise ValueError('manifest row {}: negative category {}'.format(
            row_number, index))
    return index


def load_image_folder(root, manifest=MANIFEST, image_size=32,
                      categories=None):
    """Reads images listed in a manifest.

    Parameters
    ----------
    root : str
        Directory the relative paths are resolved against.
    manifest : str
        Manifest file name or path, relative to ``root``.
    image_size : int
        Images are resized to ``image_size x image_size``.
    categories : list of str or None
        Category names; if None the category column must hold integers.

    Returns
    -------
    samples : list of Sample
        In manifest order with ``id`` equal to the row index.

    Raises
    ------
    ValueError
        Naming the offending row for missing or unreadable files and
        unknown categories.
    """
    categories = list(categories) if categories is not None else None
    with open(os.path.join(root, manifest), newline='') as f:
        reader = csv.DictReader(f)
        missing = [c for c in COLUMNS[:2] if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError('manifest lacks required columns {}'.format(
                missing))
        rows = list(reader)

    samples = []
    for i, row in enumerate(rows):
        row_number = i + 1
        path = os.path.join(root, row['relative_path'])
        category = _parse_category(row['category'].strip(), categories,
                                   row_number)
        domain = (row.get('domain') or '').strip()
        domain = int(domain) if domain else -1
        try:
            with Image.open(path) as img:
                img = img.convert('RGB')
                if img.size != (image_size, image_size):
                    img = img.resize((image_size, image_size), Image.BILINEAR)
                pixels = np.asarray(img, dtype=np.float64) / 255.0
        except (OSError, ValueError) as err:
            raise ValueError('manifest row {}: cannot read {}: {}'.format(
                row_number, path, err))
        samples.append(Sample(pixels.transpose(2, 0, 1).copy(), category,
                              domain, i))
    return samples
