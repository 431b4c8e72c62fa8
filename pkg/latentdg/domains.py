"""
Pseudo domain labels and their epoch-to-epoch reassignment.
"""

import dataclasses
import logging

import numpy as np

from latentdg.clustering import kmeans
from latentdg.diagnostics import (agreement_matrix, agreement_rate, nmi,
                                  optimal_permutation)

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PseudoDomainState:
    """Cluster assignments and aligned pseudo domain labels of the sources.

    Attributes
    ----------
    assignments : ndarray of int, (n_samples,)
        Raw k-means cluster index per sample.
    labels : ndarray of int, (n_samples,)
        Aligned label ``permutation[assignments]``.
    prev_labels : ndarray of int, (n_samples,)
        Labels of the previous epoch.
    centroids : ndarray or None, (n_labels, dim)
    permutation : ndarray of int, (n_labels,)
        Maps cluster index to label.
    cluster_sizes : ndarray of int, (n_labels,)
        Sample count per label.
    inertia : float
    agreement : float
        Fraction of samples with ``labels == prev_labels``.
    """
    assignments: np.ndarray
    labels: np.ndarray
    prev_labels: np.ndarray
    centroids: np.ndarray
    permutation: np.ndarray
    cluster_sizes: np.ndarray
    inertia: float = 0.0
    agreement: float = 1.0

    @property
    def n_labels(self):
        return self.permutation.size

    @classmethod
    def initial(cls, n_samples, n_labels):
        """State before the first clustering: every label is zero."""
        zeros = np.zeros(n_samples, dtype=np.int64)
        sizes = np.zeros(n_labels, dtype=np.int64)
        sizes[0] = n_samples
        return cls(zeros, zeros.copy(), zeros.copy(), None,
                   np.arange(n_labels), sizes)

    @classmethod
    def from_labels(cls, labels, n_labels):
        """State holding fixed labels, e.g. known domains."""
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels.copy(), labels.copy(), labels.copy(), None,
                   np.arange(n_labels),
                   np.bincount(labels, minlength=n_labels))

    def end_epoch(self):
        """Carries the current labels over as the previous labels."""
        return dataclasses.replace(self, prev_labels=self.labels.copy())

    def nmi_with(self, other):
        return nmi(self.labels, other)


def align_labels(assignments, prev_labels, n_labels):
    """Maps cluster indices onto previous labels with maximal agreement.

    Returns
    -------
    labels : ndarray of int
    permutation : ndarray of int, (n_labels,)
    """
    counts = agreement_matrix(assignments, prev_labels, n_labels)
    perm = optimal_permutation(counts)
    return perm[np.asarray(assignments, dtype=np.int64)], perm


def reassign(state, features, n_labels, random_state=None, align=True,
             max_iter=100, tol=1e-6):
    """Clusters ``features`` and aligns the result to ``state.prev_labels``.

    Parameters
    ----------
    state : PseudoDomainState
    features : ndarray, (n_samples, dim)
        Reduced domain-discriminative features, rows in sample order.
    n_labels : int
        Number of pseudo domains.
    random_state : int, RandomState or None
        Seed of the k-means initialization.
    align : bool
        If False, labels are the raw cluster indices.

    Returns
    -------
    new_state : PseudoDomainState
        ``prev_labels`` is carried over from ``state``; call ``end_epoch``
        once the epoch is over.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != state.prev_labels.size:
        raise ValueError('got {} feature rows for {} samples'.format(
            features.shape[0], state.prev_labels.size))

    result = kmeans(features, n_labels, random_state=random_state,
                    max_iter=max_iter, tol=tol)
    if align:
        labels, perm = align_labels(result.assignments, state.prev_labels,
                                    n_labels)
    else:
        labels, perm = result.assignments.copy(), np.arange(n_labels)

    new_state = PseudoDomainState(
        assignments=result.assignments,
        labels=labels,
        prev_labels=state.prev_labels,
        centroids=result.centroids[np.argsort(perm)],
        permutation=perm,
        cluster_sizes=np.bincount(labels, minlength=n_labels),
        inertia=result.inertia,
        agreement=agreement_rate(labels, state.prev_labels),
    )
    logger.debug('reassign: sizes %s, inertia %.6g, agreement %.3f',
                 new_state.cluster_sizes.tolist(), new_state.inertia,
                 new_state.agreement)
    return new_state
