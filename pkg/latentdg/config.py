"""
Run configuration: dataclasses, ``key = value`` config files and the
config echo written next to every run.
"""

import configparser
import dataclasses
import os
from typing import Tuple

from latentdg.exceptions import ConfigError
from latentdg.losses import ENTROPY_SIGNS, LossConfig
from latentdg.model import ModelConfig

MODES = ('full', 'deep_all', 'no_adv', 'no_ent', 'no_stat', 'no_iter',
         'no_clus')

OUTPUT_ROOT_ENV = 'LATENTDG_OUTPUT_ROOT'
_SECTION = 'latentdg'


def output_root():
    """Default directory for run outputs."""
    return os.environ.get(OUTPUT_ROOT_ENV, 'runs')


@dataclasses.dataclass
class DataConfig:
    """Dataset generation and splitting."""
    styles: Tuple[str, ...] = ('photo', 'cartoon', 'sketch')
    num_classes: int = 4
    n_per_domain: int = 200
    image_size: int = 32
    held_out_domain: int = 2
    val_fraction: float = 0.1
    dataset_seed: int = 0
    split_seed: int = 0

    def validate(self):
        if not self.styles:
            raise ConfigError('styles: at least one style is required')
        if self.num_classes < 2:
            raise ConfigError('num_classes: must be >= 2')
        if self.n_per_domain < 1 or self.n_per_domain % self.num_classes:
            raise ConfigError('n_per_domain: must be a positive multiple of '
                              'num_classes')
        if self.image_size < 4:
            raise ConfigError('image_size: must be >= 4')
        if not 0 <= self.held_out_domain < len(self.styles):
            raise ConfigError('held_out_domain: {} is not one of the {} '
                              'styles'.format(self.held_out_domain,
                                              len(self.styles)))
        if not 0 < self.val_fraction < 1:
            raise ConfigError('val_fraction: must lie in (0, 1)')
        return self


@dataclasses.dataclass
class TrainConfig:
    """Training hyperparameters, loss switches, schedules and seeds.

    ``mode`` selects the method variant: 'full', the classification-only
    'deep_all' baseline, or one of the ablations 'no_adv', 'no_ent',
    'no_stat' (raw tap outputs instead of statistics), 'no_iter' (cluster
    once) and 'no_clus' (true domain labels). With ``refit_reduction``
    off the projection fitted at the first clustering is kept for the run.
    """
    epochs: int = 30
    batch_size: int = 32
    base_lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_decay_factor: float = 0.1
    lr_decay_at: float = 0.8
    k_hat: int = 3
    mode: str = 'full'
    model_seed: int = 0
    shuffle_seed: int = 0
    cluster_seed: int = 0
    epsilon: float = 1e-5
    target_dim: int = 256
    flat_dim: int = 1024
    lambda_gamma: float = 10.0
    inverse_size_weighting: bool = True
    entropy_sign: str = 'minimize'
    align_first_epoch: bool = True
    augment: bool = True
    channels: Tuple[int, ...] = (16, 32, 64, 64)
    tap_layers: Tuple[int, ...] = (1, 2)
    discriminator_hidden: int = 256
    head_lr_multiplier: float = 10.0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    refit_reduction: bool = True

    def validate(self):
        if self.epochs < 1:
            raise ConfigError('epochs: must be >= 1, got {}'.format(
                self.epochs))
        if self.batch_size < 1:
            raise ConfigError('batch_size: must be >= 1')
        if not self.base_lr > 0:
            raise ConfigError('base_lr: must be positive')
        if not 0 <= self.momentum < 1:
            raise ConfigError('momentum: must lie in [0, 1)')
        if self.weight_decay < 0:
            raise ConfigError('weight_decay: must be non-negative')
        if not 0 < self.lr_decay_factor <= 1:
            raise ConfigError('lr_decay_factor: must lie in (0, 1]')
        if not 0 < self.lr_decay_at <= 1:
            raise ConfigError('lr_decay_at: must lie in (0, 1], got {}'
                              .format(self.lr_decay_at))
        if self.k_hat < 2:
            raise ConfigError('k_hat: must be >= 2')
        if self.mode not in MODES:
            raise ConfigError('mode: expected one of {}, got {!r}'.format(
                MODES, self.mode))
        if not self.epsilon > 0:
            raise ConfigError('epsilon: must be positive')
        if self.target_dim < 1 or self.flat_dim < 1:
            raise ConfigError('target_dim and flat_dim must be positive')
        if self.entropy_sign not in ENTROPY_SIGNS:
            raise ConfigError('entropy_sign: expected one of {}'.format(
                ENTROPY_SIGNS))
        self.loss_config().validate()
        return self

    def loss_config(self):
        return LossConfig(
            use_adv=self.mode not in ('deep_all', 'no_adv'),
            use_ent=self.mode not in ('deep_all', 'no_ent'),
            lambda_gamma=self.lambda_gamma,
            inverse_size_weighting=self.inverse_size_weighting,
            entropy_sign=self.entropy_sign,
        )

    def model_config(self, num_classes, image_size, num_pseudo_domains=None):
        blocks = tuple((c, 3, 1, True) for c in self.channels)
        return ModelConfig(
            conv_blocks=blocks,
            tap_layers=self.tap_layers,
            num_classes=num_classes,
            num_pseudo_domains=num_pseudo_domains or self.k_hat,
            discriminator_hidden=self.discriminator_hidden,
            image_size=image_size,
            head_lr_multiplier=self.head_lr_multiplier,
        )


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Config files.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _field_owners():
    owners = dict()
    for cls in (DataConfig, TrainConfig):
        for field in dataclasses.fields(cls):
            owners[field.name] = (cls, field)
    return owners


def _coerce(key, raw, default):
    """Parses ``raw`` into the type of ``default``."""
    raw = raw.strip() if isinstance(raw, str) else raw
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            value = configparser.ConfigParser.BOOLEAN_STATES.get(raw.lower())
            if value is None:
                raise ValueError('not a boolean')
            return value
        if isinstance(default, tuple):
            if isinstance(raw, (tuple, list)):
                items = list(raw)
            else:
                items = [s.strip() for s in raw.split(',') if s.strip()]
            kind = type(default[0]) if default else str
            return tuple(kind(v) for v in items)
        return type(default)(raw)
    except (TypeError, ValueError) as err:
        raise ConfigError('{}: cannot parse {!r} as {}: {}'.format(
            key, raw, type(default).__name__, err))


def apply_overrides(data, train, overrides):
    """Returns copies of the configs with ``overrides`` applied.

    Parameters
    ----------
    data : DataConfig
    train : TrainConfig
    overrides : dict
        Field name to raw value (string or already typed); None values are
        ignored.

    Raises
    ------
    ConfigError
        On unknown keys or unparsable values.
    """
    owners = _field_owners()
    changes = {DataConfig: dict(), TrainConfig: dict()}
    for key, raw in overrides.items():
        if raw is None:
            continue
        if key not in owners:
            raise ConfigError('unknown config key {!r}'.format(key))
        cls, field = owners[key]
        target = data if cls is DataConfig else train
        changes[cls][key] = _coerce(key, raw, getattr(target, key))
    return (dataclasses.replace(data, **changes[DataConfig]),
            dataclasses.replace(train, **changes[TrainConfig]))


def read_config_file(path):
    """Raw ``key = value`` pairs of a config file, ``#`` comments allowed."""
    parser = configparser.ConfigParser(
        comment_prefixes=('#',), inline_comment_prefixes=('#',),
        delimiters=('=',))
    parser.optionxform = str
    with open(path) as f:
        text = f.read()
    try:
        parser.read_string('[{}]\n{}'.format(_SECTION, text), source=path)
    except configparser.Error as err:
        raise ConfigError('cannot parse config file {}: {}'.format(path, err))
    return dict(parser.items(_SECTION))


def load_config(path=None, overrides=None):
    """Builds validated configs from defaults, a file, then overrides.

    Returns
    -------
    data : DataConfig
    train : TrainConfig
    """
    data, train = DataConfig(), TrainConfig()
    if path is not None:
        data, train = apply_overrides(data, train, read_config_file(path))
    if overrides:
        data, train = apply_overrides(data, train, overrides)
    data, train = data.validate(), train.validate()
    train.model_config(data.num_classes, data.image_size).validate()
    return data, train


def _format(value):
    if isinstance(value, tuple):
        return ', '.join(str(v) for v in value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return repr(value) if isinstance(value, float) else str(value)


def config_lines(data, train):
    lines = []
    for cfg in (data, train):
        for field in dataclasses.fields(cfg):
            lines.append('{} = {}'.format(field.name,
                                          _format(getattr(cfg, field.name))))
    return lines


def write_config_echo(path, data, train):
    """Writes the effective configuration in config-file format."""
    with open(path, 'w') as f:
        f.write('# effective latentdg configuration\n')
        f.write('\n'.join(config_lines(data, train)) + '\n')


def config_dict(data, train):
    out = dataclasses.asdict(data)
    out.update(dataclasses.asdict(train))
    return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}
