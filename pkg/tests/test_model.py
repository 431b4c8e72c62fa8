"""Test model construction, forward passes and checkpoints."""
import pytest
import numpy as np

from latentdg.checkpoint import load_checkpoint, read_checkpoint, \
    save_checkpoint
from latentdg.exceptions import CheckpointError, ConfigError, ShapeError
from latentdg.model import (ModelConfig, build_model, extract_tap_activations,
                            forward_all)


def small_config(**kwargs):
    options = dict(
        conv_blocks=((4, 3, 1, True), (6, 3, 1, True), (8, 3, 1, False)),
        tap_layers=(0, 1), num_classes=4, num_pseudo_domains=3,
        discriminator_hidden=10, image_size=8)
    options.update(kwargs)
    return ModelConfig(**options)


def test_default_model_shapes():
    model = build_model(seed=0)
    batch = np.random.RandomState(0).rand(2, 3, 32, 32)
    class_logits, domain_logits, taps = forward_all(model, batch, 0.5)
    assert class_logits.shape == (2, 4)
    assert domain_logits.shape == (2, 3)
    assert [t.shape for t in taps] == [(2, 32, 16, 16), (2, 64, 8, 8)]


def test_head_learning_rates():
    model = build_model(small_config(), seed=0)
    for p in model.parameters('feature_extractor'):
        assert p.lr_multiplier == 1.0
    heads = model.parameters('classifier') + model.parameters('discriminator')
    assert len(heads) == 2 + 6
    assert all(p.lr_multiplier == 10.0 for p in heads)


def test_initialization_is_seeded():
    a = build_model(small_config(), seed=7).state_dict()
    b = build_model(small_config(), seed=7).state_dict()
    c = build_model(small_config(), seed=8).state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not all(np.array_equal(a[k], c[k]) for k in a)
    np.testing.assert_array_equal(a['classifier.fc.bias'], 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(conv_blocks=((4, 3, 1, True),), tap_layers=(0,)),
    dict(tap_layers=(2,)),
    dict(tap_layers=(0, 0)),
    dict(num_classes=1),
    dict(num_pseudo_domains=1),
    dict(feature_dim=5),
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        build_model(small_config(**kwargs))


def test_tap_activations_are_untracked():
    model = build_model(small_config(), seed=0)
    taps = extract_tap_activations(model, np.zeros((3, 3, 8, 8)))
    assert [t.shape for t in taps] == [(3, 4, 8, 8), (3, 6, 4, 4)]
    assert not any(t.requires_grad for t in taps)
    assert np.all(taps[0].data >= 0)


def test_tap_activations_match_full_pass():
    model = build_model(small_config(), seed=4)
    batch = np.random.RandomState(4).randn(5, 3, 8, 8)
    taps = extract_tap_activations(model, batch)
    _, _, full_taps = forward_all(model, batch, 0.3)
    assert len(taps) == len(full_taps) == 2
    for a, b in zip(taps, full_taps):
        np.testing.assert_array_equal(a.data, b.data)


def test_spatial_sizes():
    assert small_config().spatial_sizes() == [4, 2, 2]
    assert ModelConfig().spatial_sizes() == [16, 8, 4, 2]
    strided = small_config(conv_blocks=((4, 3, 2, False), (6, 3, 1, True)),
                           tap_layers=(0,))
    assert strided.spatial_sizes() == [4, 2]


@pytest.mark.parametrize("image_size", [4, 8, 15])
def test_image_too_small_for_blocks(image_size):
    # Four pooled blocks need at least 16 pixels.
    with pytest.raises(ConfigError) as err:
        build_model(ModelConfig(image_size=image_size))
    assert 'image_size' in str(err.value)
    build_model(ModelConfig(image_size=16))


def test_wrong_input_shape():
    model = build_model(small_config(), seed=0)
    with pytest.raises(ShapeError):
        model.predict(np.zeros((2, 3, 16, 16)))


def test_checkpoint_round_trip(tmp_path):
    model = build_model(small_config(), seed=3)
    path = tmp_path / 'checkpoint.bin'
    save_checkpoint(model, path, train_config={'epochs': 2})

    batch = np.random.RandomState(1).rand(5, 3, 8, 8)
    restored = load_checkpoint(path, expected_config=small_config())
    assert np.array_equal(model.predict(batch), restored.predict(batch))

    header, state = read_checkpoint(path)
    assert header['train'] == {'epochs': 2}
    assert set(state) == set(model.state_dict())


def test_truncated_checkpoint(tmp_path):
    path = tmp_path / 'checkpoint.bin'
    save_checkpoint(build_model(small_config(), seed=0), path)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) - 100])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_corrupt_checkpoints(tmp_path):
    path = tmp_path / 'checkpoint.bin'
    save_checkpoint(build_model(small_config(), seed=0), path)
    data = bytearray(path.read_bytes())

    bad_magic = tmp_path / 'magic.bin'
    bad_magic.write_bytes(b'NOTACKPT' + bytes(data[8:]))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad_magic)

    bad_version = tmp_path / 'version.bin'
    data[8:12] = (99).to_bytes(4, 'little')
    bad_version.write_bytes(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad_version)


def test_checkpoint_config_mismatch(tmp_path):
    path = tmp_path / 'checkpoint.bin'
    save_checkpoint(build_model(small_config(num_classes=4), seed=0), path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_config=small_config(num_classes=5))
