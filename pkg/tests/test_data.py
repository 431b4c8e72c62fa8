"""Test dataset generation, splits, augmentation and image folders."""
import os

import pytest
import numpy as np
import itertools
from collections import Counter

from latentdg.data import (STYLE_PRESETS, DomainStyleSpec, default_styles,
                           export_image_folder, generate_dataset,
                           load_image_folder, make_splits, sample_labels,
                           select, stack_images)
from latentdg.data.augment import (AugmentConfig, augment, augment_batch,
                                   color_jitter, random_resized_crop,
                                   standardize, unstandardize)
from latentdg.style import ddf


@pytest.fixture(scope='module')
def dataset():
    return generate_dataset(['photo', 'cartoon', 'sketch'], num_classes=4,
                            n_per_domain=40, image_size=16, seed=0)


def test_counts_and_balance():
    samples = generate_dataset(default_styles(3), 4, 200, image_size=8,
                               seed=1)
    assert len(samples) == 600
    cells = Counter((s.domain, s.category) for s in samples)
    assert set(cells.values()) == {50}
    assert [s.id for s in samples] == list(range(600))


def test_images_are_valid(dataset):
    images = stack_images(dataset)
    assert images.shape == (120, 3, 16, 16)
    assert images.min() >= 0.0 and images.max() <= 1.0
    categories, domains = sample_labels(dataset)
    assert categories.max() == 3
    np.testing.assert_array_equal(np.bincount(domains), [40, 40, 40])


def test_generation_is_deterministic():
    a = generate_dataset(['photo', 'sketch'], 3, 6, image_size=8, seed=5)
    b = generate_dataset(['photo', 'sketch'], 3, 6, image_size=8, seed=5)
    c = generate_dataset(['photo', 'sketch'], 3, 6, image_size=8, seed=6)
    assert all(x.image.tobytes() == y.image.tobytes() for x, y in zip(a, b))
    assert not all(np.array_equal(x.image, y.image) for x, y in zip(a, c))


def test_generation_errors():
    with pytest.raises(ValueError) as err:
        generate_dataset(['photo'], 7, 7)
    assert 'circle' in str(err.value)
    with pytest.raises(ValueError):
        generate_dataset(['photo'], 4, 6)
    with pytest.raises(ValueError):
        generate_dataset(['photo', 'photo'], 2, 2)
    with pytest.raises(ValueError):
        generate_dataset([], 2, 2)
    with pytest.raises(ValueError):
        generate_dataset([DomainStyleSpec('bad', render_mode='neon')], 2, 2)


def test_default_styles():
    assert [s.name for s in default_styles(4)] == \
        ['photo', 'cartoon', 'sketch', 'painting']
    with pytest.raises(ValueError):
        default_styles(5)
    for style in STYLE_PRESETS.values():
        style.validate()


def test_style_statistics_separate_domains(dataset):
    images = stack_images(dataset)
    _, domains = sample_labels(dataset)
    rows = ddf([images]).rows
    dist = np.linalg.norm(rows[:, None] - rows[None], axis=2)
    same = domains[:, None] == domains[None]
    off_diagonal = ~np.eye(len(rows), dtype=bool)
    within = dist[same & off_diagonal].mean()
    between = dist[~same].mean()
    assert between > within


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Splits.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@pytest.mark.parametrize(
    "held_out,val_fraction",
    itertools.product(range(3), [0.1, 0.3])
)
def test_split_partition(dataset, held_out, val_fraction):
    split = make_splits(dataset, held_out, val_fraction, seed=0)
    train, val, target = set(split.train), set(split.val), set(split.target)
    assert not train & val and not train & target and not val & target
    assert train | val | target == {s.id for s in dataset}
    assert all(s.domain == held_out for s in select(dataset, split.target))
    assert len(split.target) == 40

    # 10 samples per (domain, class) stratum.
    per_stratum = int(np.floor(val_fraction * 10))
    assert len(split.val) == 2 * 4 * per_stratum
    cells = Counter((s.domain, s.category) for s in select(dataset, split.val))
    assert set(cells.values()) == {per_stratum}
    assert split.source_domains(dataset) == \
        sorted(set(range(3)) - {held_out})


def test_split_is_deterministic(dataset):
    a = make_splits(dataset, 1, 0.3, seed=4)
    b = make_splits(dataset, 1, 0.3, seed=4)
    c = make_splits(dataset, 1, 0.3, seed=5)
    assert a.val == b.val and a.train == b.train
    assert a.val != c.val
    assert a.val == sorted(a.val)


def test_split_errors(dataset):
    with pytest.raises(ValueError):
        make_splits(dataset, 3)
    with pytest.raises(ValueError):
        make_splits(dataset, 0, val_fraction=1.0)
    single = [s for s in dataset if s.domain == 0]
    with pytest.raises(ValueError):
        make_splits(single, 0)
    with pytest.raises(KeyError):
        select(dataset, [0, 999])


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Augmentation.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def test_disabled_augmentation_only_standardizes(dataset):
    image = dataset[0].image
    config = AugmentConfig(crop=False, flip=False, jitter=False)
    np.testing.assert_allclose(augment(image, 0, config),
                               standardize(image, config))
    np.testing.assert_allclose(unstandardize(standardize(image)), image)


def test_augmentation_is_deterministic(dataset):
    image = dataset[3].image
    np.testing.assert_array_equal(augment(image, 11), augment(image, 11))
    batch = stack_images(dataset[:4])
    np.testing.assert_array_equal(augment_batch(batch, 2),
                                  augment_batch(batch, 2))
    assert augment_batch(batch, 2).shape == batch.shape


@pytest.mark.parametrize("seed", range(20))
def test_jitter_bounds(dataset, seed):
    image = dataset[seed].image
    raw = color_jitter(image, seed, clamp=False)
    assert raw.min() >= -0.2 - 1e-12 and raw.max() <= 1.2 + 1e-12
    clamped = color_jitter(image, seed)
    assert clamped.min() >= 0.0 and clamped.max() <= 1.0

    restored = unstandardize(augment(image, seed))
    assert restored.min() >= -1e-12 and restored.max() <= 1.0 + 1e-12


def test_full_crop_preserves_image():
    image = np.random.RandomState(0).rand(3, 6, 6)
    out = random_resized_crop(image, 0, scale=(1.0, 1.0), ratio=(1.0, 1.0))
    np.testing.assert_allclose(out, image, atol=1e-12)


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(crop_scale=(0.0, 1.0)).validate()
    with pytest.raises(ValueError):
        AugmentConfig(brightness=1.0).validate()
    with pytest.raises(ValueError):
        AugmentConfig(std=(0.25, 0.0, 0.25)).validate()


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Image folders.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def test_image_folder_round_trip(tmp_path, dataset):
    samples = dataset[::10]
    manifest = export_image_folder(samples, str(tmp_path))
    assert os.path.basename(manifest) == 'manifest.csv'

    loaded = load_image_folder(str(tmp_path), image_size=16)
    assert len(loaded) == len(samples)
    for original, copy in zip(samples, loaded):
        assert copy.category == original.category
        assert copy.domain == original.domain
        np.testing.assert_allclose(copy.image, original.image,
                                   atol=0.5 / 255 + 1e-9)
    assert [s.id for s in loaded] == list(range(len(samples)))


def _write_manifest(root, rows):
    with open(os.path.join(root, 'manifest.csv'), 'w') as f:
        f.write('relative_path,category,domain\n')
        for row in rows:
            f.write(','.join(row) + '\n')


def test_missing_file_names_path(tmp_path, dataset):
    export_image_folder(dataset[:1], str(tmp_path))
    _write_manifest(str(tmp_path), [('domain0/000000.png', '0', '0'),
                                    ('domain0/absent.png', '1', '0')])
    with pytest.raises(ValueError) as err:
        load_image_folder(str(tmp_path), image_size=16)
    assert 'absent.png' in str(err.value)
    assert 'row 2' in str(err.value)


def test_named_categories_and_missing_domain(tmp_path, dataset):
    export_image_folder(dataset[:1], str(tmp_path))
    _write_manifest(str(tmp_path), [('domain0/000000.png', 'circle', ''),
                                    ('domain0/000000.png', 'square', '1')])
    loaded = load_image_folder(str(tmp_path), image_size=8,
                               categories=['circle', 'square'])
    assert [s.category for s in loaded] == [0, 1]
    assert [s.domain for s in loaded] == [-1, 1]
    assert loaded[0].image.shape == (3, 8, 8)

    with pytest.raises(ValueError) as err:
        load_image_folder(str(tmp_path), categories=['circle'])
    assert 'square' in str(err.value)
