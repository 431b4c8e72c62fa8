"""
Feature extractor, classifier and domain discriminator.

The feature extractor F_f is a stack of conv blocks (conv, relu, optional
2x2 max-pool) followed by global average pooling. Selected blocks are
declared as taps: their post-relu activations feed the style statistics
used for latent-domain discovery. The classifier F_c is one linear layer
and the discriminator F_d is a three-layer perceptron preceded by a
gradient reversal layer.
"""

import dataclasses
from typing import Optional, Tuple

import numpy as np

from latentdg.exceptions import ConfigError, ShapeError
from latentdg.nn import functional as F
from latentdg.nn.layers import Conv2d, Linear
from latentdg.nn.tensor import as_tensor, no_grad
from latentdg.utils import check_random_state

# (out_channels, kernel, stride, pooling)
DEFAULT_BLOCKS = (
    (16, 3, 1, True),
    (32, 3, 1, True),
    (64, 3, 1, True),
    (64, 3, 1, True),
)


@dataclasses.dataclass
class ModelConfig:
    """Architecture of the three networks.

    Attributes
    ----------
    conv_blocks : tuple of (out_channels, kernel, stride, pooling)
        Blocks of F_f in order. Convolutions use "same"-style padding
        ``kernel // 2``.
    tap_layers : tuple of int
        0-based indices of blocks whose activations feed style statistics.
    feature_dim : int or None
        Output width of F_f; equals the last block's channels. None derives it.
    num_classes : int
        Number of object categories C.
    num_pseudo_domains : int
        Discriminator output width K̂.
    discriminator_hidden : int
        Width of both hidden layers of F_d.
    in_channels : int
    image_size : int
    head_lr_multiplier : float
        Learning-rate multiplier of F_c and F_d parameters.
    """
    conv_blocks: Tuple[Tuple[int, int, int, bool], ...] = DEFAULT_BLOCKS
    tap_layers: Tuple[int, ...] = (1, 2)
    feature_dim: Optional[int] = None
    num_classes: int = 4
    num_pseudo_domains: int = 3
    discriminator_hidden: int = 256
    in_channels: int = 3
    image_size: int = 32
    head_lr_multiplier: float = 10.0

    def __post_init__(self):
        self.conv_blocks = tuple(
            (int(c), int(k), int(s), bool(p)) for c, k, s, p in self.conv_blocks)
        self.tap_layers = tuple(sorted(int(t) for t in self.tap_layers))
        if self.feature_dim is None and self.conv_blocks:
            self.feature_dim = self.conv_blocks[-1][0]

    def validate(self):
        """Raises ConfigError naming the first invalid field."""
        n_blocks = len(self.conv_blocks)
        if n_blocks < 2:
            raise ConfigError('conv_blocks: at least 2 blocks are required, '
                              'got {}'.format(n_blocks))
        for i, (c, k, s, _) in enumerate(self.conv_blocks):
            if c < 1 or k < 1 or s < 1:
                raise ConfigError('conv_blocks[{}]: channels, kernel and '
                                  'stride must be positive'.format(i))
        if not self.tap_layers:
            raise ConfigError('tap_layers: at least one tap is required')
        if len(set(self.tap_layers)) != len(self.tap_layers):
            raise ConfigError('tap_layers: duplicate indices {}'.format(
                self.tap_layers))
        for t in self.tap_layers:
            if not 0 <= t < n_blocks - 1:
                raise ConfigError(
                    'tap_layers: index {} out of range; taps must reference '
                    'lower blocks in [0, {})'.format(t, n_blocks - 1))
        if self.feature_dim != self.conv_blocks[-1][0]:
            raise ConfigError('feature_dim: {} does not match last block '
                              'width {}'.format(self.feature_dim,
                                                self.conv_blocks[-1][0]))
        if self.num_classes < 2:
            raise ConfigError('num_classes: must be >= 2, got {}'.format(
                self.num_classes))
        if self.num_pseudo_domains < 2:
            raise ConfigError('num_pseudo_domains: must be >= 2, got {}'
                              .format(self.num_pseudo_domains))
        if self.discriminator_hidden < 1:
            raise ConfigError('discriminator_hidden: must be positive')
        if self.in_channels < 1 or self.image_size < 1:
            raise ConfigError('in_channels and image_size must be positive')
        if not self.head_lr_multiplier > 0:
            raise ConfigError('head_lr_multiplier: must be positive')
        self.spatial_sizes()
        return self

    def spatial_sizes(self):
        """Side length of each block's output, after its pooling.

        Raises
        ------
        ConfigError
            If ``image_size`` is too small for ``conv_blocks``.
        """
        size, sizes = self.image_size, []
        for i, (_, k, s, pooling) in enumerate(self.conv_blocks):
            size = (size + 2 * (k // 2) - k) // s + 1
            if size < 1 or (pooling and size < 2):
                raise ConfigError(
                    'image_size: {} is too small for conv_blocks; block {} '
                    'has spatial size {}{}'.format(
                        self.image_size, i, max(size, 0),
                        ' before pooling' if pooling else ''))
            if pooling:
                size //= 2
            sizes.append(size)
        return sizes

    def to_dict(self):
        out = dataclasses.asdict(self)
        out['conv_blocks'] = [list(b) for b in self.conv_blocks]
        out['tap_layers'] = list(self.tap_layers)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class Model(object):
    """The triple (F_f, F_c, F_d) with declared tap layers.

    Attributes
    ----------
    config : ModelConfig
    blocks : list of (Conv2d, pooling)
    classifier : Linear
    discriminator : list of Linear
    taps : list of Tensor
        Tap activations recorded by the latest ``extract`` call.
    """

    def __init__(self, config, random_state=None):
        config.validate()
        self.config = config
        rs = check_random_state(random_state)
        head = config.head_lr_multiplier

        self.blocks = []
        in_channels = config.in_channels
        for i, (out_channels, kernel, stride, pooling) in enumerate(
                config.conv_blocks):
            conv = Conv2d(in_channels, out_channels, kernel, stride=stride,
                          padding=kernel // 2, group='feature_extractor',
                          name='feature_extractor.block{}'.format(i),
                          random_state=rs)
            self.blocks.append((conv, pooling))
            in_channels = out_channels

        self.classifier = Linear(
            config.feature_dim, config.num_classes, 'classifier', head,
            name='classifier.fc', random_state=rs)

        hidden = config.discriminator_hidden
        widths = [config.feature_dim, hidden, hidden, config.num_pseudo_domains]
        self.discriminator = [
            Linear(widths[i], widths[i + 1], 'discriminator', head,
                   name='discriminator.fc{}'.format(i), random_state=rs)
            for i in range(3)
        ]
        self.taps = []

    # ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
    # Parameters.
    # ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

    def parameters(self, group=None):
        params = []
        for conv, _ in self.blocks:
            params.extend(conv.parameters())
        params.extend(self.classifier.parameters())
        for layer in self.discriminator:
            params.extend(layer.parameters())
        if group is not None:
            params = [p for p in params if p.group == group]
        return params

    def state_dict(self):
        """Ordered mapping of parameter name to a copy of its values."""
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state):
        params = self.parameters()
        missing = [p.name for p in params if p.name not in state]
        if missing:
            raise KeyError('missing parameters: {}'.format(missing))
        for p in params:
            values = np.asarray(state[p.name], dtype=np.float64)
            if values.shape != p.shape:
                raise ShapeError('load_state_dict', '{} has shape {}, '
                                 'expected {}'.format(p.name, values.shape,
                                                      p.shape))
            p.data = values.copy()

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    # ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
    # Forward passes.
    # ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

    def _check_batch(self, batch):
        c, s = self.config.in_channels, self.config.image_size
        if batch.ndim != 4 or batch.shape[1:] != (c, s, s):
            raise ShapeError('model', 'expected batch of shape (N, {}, {}, {}),'
                             ' got {}'.format(c, s, s, batch.shape))

    def extract(self, batch, stop_after=None):
        """Runs F_f.

        Parameters
        ----------
        batch : Tensor or ndarray, shape (N, C, H, W)
        stop_after : int or None
            If given, stops after that block and returns no features.

        Returns
        -------
        features : Tensor or None
            (N, feature_dim) globally pooled output of the last block.
        taps : list of Tensor
            Post-relu activations of the tap blocks, ascending order.
        """
        x = as_tensor(batch)
        self._check_batch(x)
        taps = []
        for i, (conv, pooling) in enumerate(self.blocks):
            x = F.relu(conv(x))
            if i in self.config.tap_layers:
                taps.append(x)
            if stop_after is not None and i >= stop_after:
                self.taps = taps
                return None, taps
            if pooling:
                x = F.max_pool2d(x, 2)
        self.taps = taps
        return F.global_avg_pool2d(x), taps

    def classify(self, features):
        return self.classifier(features)

    def discriminate(self, features, lam=None):
        """Runs F_d, behind a GRL with scale ``lam`` unless ``lam`` is None."""
        h = features if lam is None else F.grl(features, lam)
        h = F.relu(self.discriminator[0](h))
        h = F.relu(self.discriminator[1](h))
        return self.discriminator[2](h)

    def predict(self, batch, batch_size=256):
        """Class logits as an ndarray, computed without a graph."""
        batch = np.asarray(getattr(batch, 'data', batch))
        out = []
        with no_grad():
            for start in range(0, batch.shape[0], batch_size):
                feats, _ = self.extract(batch[start:start + batch_size])
                out.append(self.classify(feats).data)
        return np.concatenate(out, axis=0)


def build_model(config=None, seed=0):
    """Builds a model with deterministic Kaiming-uniform initialization.

    Parameters
    ----------
    config : ModelConfig or None
        Architecture; None uses the default toy configuration.
    seed : int
        Seed of the initialization.

    Raises
    ------
    ConfigError
        If the configuration is invalid.
    """
    config = ModelConfig() if config is None else config
    return Model(config, random_state=seed)


def forward_all(model, batch, lam):
    """One pass feeding both heads through the shared feature extractor.

    Parameters
    ----------
    model : Model
    batch : Tensor or ndarray, shape (N, C, H, W)
    lam : float
        GRL scale for the discriminator branch.

    Returns
    -------
    class_logits : Tensor, (N, num_classes)
    domain_logits : Tensor, (N, num_pseudo_domains)
    taps : list of Tensor
    """
    features, taps = model.extract(batch)
    return model.classify(features), model.discriminate(features, lam), taps


def extract_tap_activations(model, batch):
    """Tap activations for ``batch`` without recording a graph.

    Only the blocks up to the deepest tap are evaluated.

    Returns
    -------
    taps : list of Tensor
        One activation per tap layer, ascending layer order.
    """
    with no_grad():
        _, taps = model.extract(batch, stop_after=max(model.config.tap_layers))
    return taps
