"""
Channel-wise convolutional feature statistics as domain-discriminative
features (ddf).

For an activation of shape (batch, C, H, W), every channel is summarised by
its spatial mean and standard deviation. Stacking these statistics over the
tap layers gives one ddf vector per sample, which is optionally reduced by
principal component analysis before clustering.
"""

import dataclasses
from typing import List, Tuple

import numpy as np
import scipy.linalg

from latentdg.exceptions import ShapeError

EPSILON = 1e-5


def _as_array(x):
    return np.asarray(getattr(x, 'data', x), dtype=np.float64)


@dataclasses.dataclass
class StyleStats:
    """Per-sample, per-channel mean and standard deviation of one layer."""
    mu: np.ndarray
    sigma: np.ndarray
    epsilon: float
    layer_index: int = 0


@dataclasses.dataclass
class DdfMatrix:
    """Stacked statistics, one row per sample.

    Attributes
    ----------
    rows : ndarray, (n_samples, dim)
    layer_manifest : list of (layer, statistic, channel)
        Column descriptions, ordered as [mu(phi_1), sigma(phi_1), ...,
        mu(phi_M), sigma(phi_M)].
    """
    rows: np.ndarray
    layer_manifest: List[Tuple[int, str, int]]

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]

    def header(self):
        return ['layer{}_{}_{}'.format(layer, stat, c)
                for layer, stat, c in self.layer_manifest]


def channel_stats(activation, epsilon=EPSILON, layer_index=0):
    """Spatial mean and standard deviation of each channel.

    ``sigma = sqrt(var + epsilon)`` with the population variance.

    Parameters
    ----------
    activation : Tensor or ndarray, (batch, C, H, W)
    epsilon : float
        Positive variance-stabilising constant.
    layer_index : int
        Recorded on the result.

    Returns
    -------
    stats : StyleStats
        ``mu`` and ``sigma`` both of shape (batch, C).
    """
    x = _as_array(activation)
    if x.ndim != 4 or x.shape[2] * x.shape[3] < 1:
        raise ShapeError('channel_stats', 'expected (batch, C, H, W) with '
                         'H*W >= 1, got {}'.format(x.shape))
    if not epsilon > 0:
        raise ValueError('epsilon must be positive, got {}'.format(epsilon))
    mu = x.mean(axis=(2, 3))
    var = x.var(axis=(2, 3))
    return StyleStats(mu, np.sqrt(var + epsilon), epsilon, layer_index)


def ddf(tap_activations, epsilon=EPSILON, tap_layers=None):
    """Stacks the channel statistics of several layers per sample.

    Parameters
    ----------
    tap_activations : list of Tensor or ndarray
        M activations sharing the batch dimension.
    epsilon : float
    tap_layers : sequence of int or None
        Layer indices for the manifest; defaults to 0..M-1.

    Returns
    -------
    features : DdfMatrix
        ``dim == sum(2 * C_m)``.
    """
    if not tap_activations:
        raise ValueError('ddf needs at least one activation')
    tap_layers = range(len(tap_activations)) if tap_layers is None \
        else tap_layers
    batch = {_as_array(a).shape[0] for a in tap_activations}
    if len(batch) != 1:
        raise ShapeError('ddf', 'activations disagree on batch size: {}'
                         .format(sorted(batch)))

    columns, manifest = [], []
    for layer, activation in zip(tap_layers, tap_activations):
        stats = channel_stats(activation, epsilon, layer)
        n_channels = stats.mu.shape[1]
        columns += [stats.mu, stats.sigma]
        manifest += [(layer, 'mu', c) for c in range(n_channels)]
        manifest += [(layer, 'sigma', c) for c in range(n_channels)]
    return DdfMatrix(np.concatenate(columns, axis=1), manifest)


def flat_features(activations, dim=1024):
    """Flattened activations mean-pooled into ``dim`` contiguous bins.

    Used in place of the statistics when clustering raw layer outputs.
    ``activations`` is one activation or a list of tap activations; every
    tap is flattened per sample and the results are concatenated before
    pooling. Fewer than ``dim`` values are returned unpooled.
    """
    if not isinstance(activations, (list, tuple)):
        activations = [activations]
    if not activations:
        raise ShapeError('flat_features', 'no activations given')
    parts = [_as_array(a) for a in activations]
    n = parts[0].shape[0]
    if any(p.shape[0] != n for p in parts):
        raise ShapeError('flat_features', 'batch sizes differ: {}'.format(
            [p.shape[0] for p in parts]))
    flat = np.concatenate([p.reshape(n, -1) for p in parts], axis=1)
    if flat.shape[1] <= dim:
        return flat
    bins = np.array_split(np.arange(flat.shape[1]), dim)
    return np.column_stack([flat[:, b].mean(axis=1) for b in bins])


def principal_components(rows, n_components):
    """Top principal directions of mean-centred ``rows``.

    Each direction's largest-magnitude entry is made positive.

    Returns
    -------
    mean : ndarray, (dim,)
    components : ndarray, (k, dim), with k = min(n_components, rank bound)
    explained_variance : ndarray, (k,)
    """
    mean = rows.mean(axis=0)
    centred = rows - mean
    _, s, vt = scipy.linalg.svd(centred, full_matrices=False)
    k = min(n_components, vt.shape[0])
    components = vt[:k].copy()
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), idx])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    explained = s[:k] ** 2 / max(rows.shape[0] - 1, 1)
    return mean, components, explained


def _rows(features):
    return np.asarray(getattr(features, 'rows', features), dtype=np.float64)


@dataclasses.dataclass
class Reduction:
    """A fitted projection onto principal components.

    ``components`` is None when the fitted width did not exceed
    ``target_dim``; such a reduction passes features through unchanged.
    """
    dim: int
    target_dim: int
    mean: np.ndarray = None
    components: np.ndarray = None

    def apply(self, features):
        """Projects ``features`` with the fitted mean and directions.

        Raises
        ------
        ShapeError
            If the feature width differs from the fitted one.
        """
        rows = _rows(features)
        if rows.ndim != 2 or rows.shape[1] != self.dim:
            raise ShapeError('reduce_dim', 'fitted on width {}, got shape {}'
                             .format(self.dim, rows.shape))
        if self.components is None:
            return rows.copy()
        reduced = (rows - self.mean) @ self.components.T
        if reduced.shape[1] < self.target_dim:
            pad = np.zeros((rows.shape[0], self.target_dim - reduced.shape[1]))
            reduced = np.hstack((reduced, pad))
        return reduced


def fit_reduction(features, target_dim):
    """Fits the projection used by ``reduce_dim``.

    Parameters
    ----------
    features : DdfMatrix or ndarray, (n_samples, dim)
    target_dim : int

    Returns
    -------
    Reduction
    """
    rows = _rows(features)
    if target_dim < 1:
        raise ValueError('target_dim must be >= 1, got {}'.format(target_dim))
    if rows.shape[1] <= target_dim:
        return Reduction(rows.shape[1], target_dim)
    if rows.shape[0] < 2:
        raise ValueError('reduce_dim needs at least 2 samples, got {}'.format(
            rows.shape[0]))
    mean, components, _ = principal_components(rows, target_dim)
    return Reduction(rows.shape[1], target_dim, mean, components)


def reduce_dim(features, target_dim, seed=None):
    """Projects features onto their top ``target_dim`` principal components.

    Parameters
    ----------
    features : DdfMatrix or ndarray, (n_samples, dim)
    target_dim : int
        Output width. If ``dim <= target_dim`` the features pass through
        unchanged.
    seed : int or None
        Unused; the SVD is deterministic and component signs are fixed.

    Returns
    -------
    reduced : ndarray, (n_samples, min(dim, target_dim))
        Zero columns are appended when fewer than ``target_dim`` components
        exist.
    """
    return fit_reduction(features, target_dim).apply(features)


def write_ddf_csv(features, path):
    """Dumps a DdfMatrix as CSV with the column manifest as header."""
    np.savetxt(path, features.rows, delimiter=',',
               header=','.join(features.header()), comments='')
