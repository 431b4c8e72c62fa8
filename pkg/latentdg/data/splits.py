"""
Leave-one-domain-out splits.
"""

import dataclasses
from collections import defaultdict
from typing import List

import numpy as np

from latentdg.utils import check_random_state


@dataclasses.dataclass
class DatasetSplit:
    """Disjoint sample-id lists.

    ``target`` holds every sample of the held-out domain; ``train`` and
    ``val`` partition the remaining source samples.
    """
    train: List[int]
    val: List[int]
    target: List[int]
    val_fraction: float
    held_out_domain: int

    def source_domains(self, dataset):
        by_id = {s.id: s for s in dataset}
        return sorted({by_id[i].domain for i in self.train + self.val})


def make_splits(dataset, held_out_domain, val_fraction=0.1, seed=None):
    """Holds out one domain as target and splits the rest into train/val.

    The validation set takes ``floor(val_fraction * n)`` samples of every
    (domain, category) stratum of size ``n``.

    Parameters
    ----------
    dataset : list of Sample
    held_out_domain : int
    val_fraction : float
        In (0, 1).
    seed : int, RandomState or None

    Returns
    -------
    split : DatasetSplit
        Id lists are sorted.

    Raises
    ------
    ValueError
        If the domain does not exist, ``val_fraction`` is out of range or no
        source sample remains.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError('val_fraction must lie in (0, 1), got {}'.format(
            val_fraction))
    domains = sorted({s.domain for s in dataset})
    if held_out_domain not in domains:
        raise ValueError('held-out domain {} not in dataset domains {}'
                         .format(held_out_domain, domains))

    target = sorted(s.id for s in dataset if s.domain == held_out_domain)
    strata = defaultdict(list)
    for s in dataset:
        if s.domain != held_out_domain:
            strata[(s.domain, s.category)].append(s.id)
    if not strata:
        raise ValueError('no source samples remain after holding out domain '
                         '{}'.format(held_out_domain))

    rs = check_random_state(seed)
    train, val = [], []
    for key in sorted(strata):
        ids = np.array(sorted(strata[key]))
        ids = ids[rs.permutation(ids.size)]
        n_val = int(np.floor(val_fraction * ids.size))
        val.extend(ids[:n_val].tolist())
        train.extend(ids[n_val:].tolist())

    return DatasetSplit(sorted(train), sorted(val), target, val_fraction,
                        held_out_domain)


def select(dataset, ids):
    """Samples with the given ids, in ``ids`` order."""
    by_id = {s.id: s for s in dataset}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise KeyError('unknown sample ids: {}'.format(missing[:10]))
    return [by_id[i] for i in ids]
