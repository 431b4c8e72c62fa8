"""
Agreement between labelings: contingency counts, optimal label alignment
and normalized mutual information.
"""

import numpy as np
from munkres import Munkres
from sklearn.metrics import normalized_mutual_info_score


def _check_label_vector(name, labels, n_labels):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError('{} must be a 1d vector, got shape {}'.format(
            name, labels.shape))
    if labels.size and (labels.min() < 0 or labels.max() >= n_labels):
        raise ValueError('{} has values outside [0, {}): min {}, max {}'
                         .format(name, n_labels, labels.min(), labels.max()))
    return labels.astype(np.int64)


def agreement_matrix(assignments, prev_labels, n_labels):
    """Counts co-occurrences of new cluster indices and previous labels.

    Parameters
    ----------
    assignments : array of int, (n_samples,)
    prev_labels : array of int, (n_samples,)
    n_labels : int

    Returns
    -------
    counts : ndarray of int, (n_labels, n_labels)
        ``counts[j, k]`` is the number of samples with cluster ``j`` and
        previous label ``k``.
    """
    a = _check_label_vector('assignments', assignments, n_labels)
    b = _check_label_vector('prev_labels', prev_labels, n_labels)
    if a.size != b.size:
        raise ValueError('label vectors differ in length: {} and {}'.format(
            a.size, b.size))
    flat = np.bincount(a * n_labels + b, minlength=n_labels * n_labels)
    return flat.reshape(n_labels, n_labels)


def _best_total(matrix):
    """Maximum of sum_j matrix[j, pi(j)] over bijections pi."""
    if matrix.size == 0:
        return 0.0
    cost = matrix.max() - matrix
    indices = Munkres().compute(cost.tolist())
    return float(sum(matrix[j, k] for j, k in indices))


def optimal_permutation(matrix):
    """Relabeling of clusters that maximizes agreement with previous labels.

    Solves the assignment problem with the Kuhn-Munkres algorithm. Among
    all optimal bijections, the lexicographically smallest one is returned.

    Parameters
    ----------
    matrix : ndarray, (K, K)
        Non-negative agreement counts.

    Returns
    -------
    perm : ndarray of int, (K,)
        ``perm[j]`` is the label given to cluster ``j``.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError('expected a square matrix, got shape {}'.format(
            matrix.shape))
    n = matrix.shape[0]
    target = _best_total(matrix)
    tol = 1e-9 * max(1.0, abs(target))

    perm = np.empty(n, dtype=np.int64)
    free = list(range(n))
    fixed = 0.0
    for j in range(n):
        for k in free:
            rest = [c for c in free if c != k]
            sub = matrix[np.ix_(range(j + 1, n), rest)]
            if fixed + matrix[j, k] + _best_total(sub) >= target - tol:
                perm[j] = k
                fixed += matrix[j, k]
                free = rest
                break
    return perm


def agreement_rate(labels, prev_labels):
    """Fraction of samples whose label equals the previous one."""
    labels, prev_labels = np.asarray(labels), np.asarray(prev_labels)
    if labels.shape != prev_labels.shape:
        raise ValueError('label vectors differ in shape: {} and {}'.format(
            labels.shape, prev_labels.shape))
    if labels.size == 0:
        return 0.0
    return float(np.mean(labels == prev_labels))


def nmi(labels_a, labels_b):
    """Normalized mutual information with geometric-mean normalization.

    ``I(A; B) / sqrt(H(A) H(B))`` using natural logarithms. Defined as 0
    when either labeling is constant.

    Raises
    ------
    ValueError
        If the label vectors differ in length.
    """
    a, b = np.asarray(labels_a).ravel(), np.asarray(labels_b).ravel()
    if a.size != b.size:
        raise ValueError('label vectors differ in length: {} and {}'.format(
            a.size, b.size))
    if np.unique(a).size <= 1 or np.unique(b).size <= 1:
        return 0.0
    score = normalized_mutual_info_score(a, b, average_method='geometric')
    return float(np.clip(score, 0.0, 1.0))
