"""
k-means clustering of domain-discriminative features.
"""

import logging
import timeit

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus

from latentdg.utils import check_random_state

logger = logging.getLogger(__name__)


class KMeansResult(object):
    """
    Holds result of k-means.

    Attributes
    ----------
    assignments : ndarray of int, (n_points,)
    centroids : ndarray, (n_clusters, dim)
    inertia : float
        Sum of squared distances of points to their assigned centroid.
    inertia_hist : list of floats
        Inertia after each Lloyd iteration.
    iterations : int
    converged : bool
        True if the centroid shift fell below ``tol`` before ``max_iter``.
    total_time : float
    """

    def __init__(self, centroids, tol=1e-6, max_iter=100, verbose=False):
        self.centroids = centroids
        self.assignments = None
        self.inertia = np.inf
        self.inertia_hist = []
        self.tol = tol
        self.max_iter = max_iter
        self.verbose = verbose
        self.iterations = 0
        self.converged = False
        self.n_repaired = 0
        self.t0 = timeit.default_timer()
        self.total_time = None

    def update(self, inertia, shift):
        self.iterations += 1
        self.inertia = inertia
        self.inertia_hist.append(inertia)
        self.converged = shift < self.tol
        if self.verbose:
            logger.debug('kmeans: iteration %d, inertia %.6g, shift %.3g',
                         self.iterations, inertia, shift)

    @property
    def still_optimizing(self):
        return not self.converged and self.iterations < self.max_iter

    def finalize(self):
        self.total_time = timeit.default_timer() - self.t0
        if self.verbose:
            logger.info('kmeans: %s after %d iterations, %.3f seconds. '
                        'Inertia: %.6g.',
                        'converged' if self.converged else 'stopped',
                        self.iterations, self.total_time, self.inertia)
        return self


def _assign(points, centroids):
    dist = cdist(points, centroids, 'sqeuclidean')
    assignments = np.argmin(dist, axis=1)
    return assignments, dist[np.arange(points.shape[0]), assignments]


def _repair_empty(points, assignments, closest, centroids):
    """Reseeds every empty cluster at the point farthest from its centroid."""
    n_repaired = 0
    counts = np.bincount(assignments, minlength=centroids.shape[0])
    for k in np.flatnonzero(counts == 0):
        # Donor clusters must keep at least one member.
        counts = np.bincount(assignments, minlength=centroids.shape[0])
        eligible = counts[assignments] > 1
        far = np.where(eligible, closest, -np.inf)
        i = int(np.argmax(far))
        assignments[i] = k
        closest[i] = 0.0
        centroids[k] = points[i]
        n_repaired += 1
    return n_repaired


def kmeans(points, n_clusters, random_state=None, max_iter=100, tol=1e-6,
           verbose=False):
    """Lloyd's algorithm from k-means++ seeding.

    Parameters
    ----------
    points : ndarray, (n_points, dim)
    n_clusters : int
        Number of clusters K, with ``1 <= K <= n_points``.
    random_state : int, RandomState or None
        Seed for the k-means++ initialization.
    max_iter : int
        Maximum number of Lloyd iterations.
    tol : float
        Stops when the largest centroid displacement is below ``tol``.
    verbose : bool
        Whether to log progress.

    Returns
    -------
    result : KMeansResult
        Every cluster is non-empty.

    Raises
    ------
    ValueError
        If ``n_clusters`` is not in ``[1, n_points]``.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError('kmeans expects a 2d array, got shape {}'.format(
            points.shape))
    n_points = points.shape[0]
    if not 1 <= n_clusters <= n_points:
        raise ValueError('kmeans needs 1 <= n_clusters <= n_points, got '
                         'n_clusters={} and n_points={}'.format(n_clusters,
                                                                n_points))

    rs = check_random_state(random_state)
    centroids, _ = kmeans_plusplus(points, n_clusters, random_state=rs)
    result = KMeansResult(centroids.astype(np.float64), tol, max_iter,
                          verbose)

    while result.still_optimizing:
        assignments, closest = _assign(points, result.centroids)
        result.n_repaired += _repair_empty(points, assignments, closest,
                                           result.centroids)

        new_centroids = np.stack([
            points[assignments == k].mean(axis=0) for k in range(n_clusters)])
        shift = np.max(np.linalg.norm(new_centroids - result.centroids,
                                      axis=1))
        result.centroids = new_centroids
        inertia = float(np.sum(
            (points - new_centroids[assignments]) ** 2))
        result.update(inertia, shift)

    # Final assignment against the last centroids.
    assignments, closest = _assign(points, result.centroids)
    repaired = _repair_empty(points, assignments, closest, result.centroids)
    if repaired:
        result.n_repaired += repaired
        result.centroids = np.stack([
            points[assignments == k].mean(axis=0) for k in range(n_clusters)])
    result.assignments = assignments
    result.inertia = float(np.sum(
        (points - result.centroids[assignments]) ** 2))
    return result.finalize()
