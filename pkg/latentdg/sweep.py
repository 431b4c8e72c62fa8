"""
Experiment sweeps over modes, pseudo-domain counts, held-out domains and
seeds, and their aggregation into summary tables.
"""

import csv
import dataclasses
import itertools
import logging
import os
from typing import Tuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from latentdg.config import DataConfig, TrainConfig, write_config_echo
from latentdg.data.splits import make_splits
from latentdg.data.synthetic import generate_dataset
from latentdg.trainer import train

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'summary.csv'
CELL_KEYS = ('mode', 'k_hat', 'held_out_domain', 'seed')
METRICS = ('target_acc', 'val_acc', 'nmi_domain', 'nmi_category')


@dataclasses.dataclass
class ExperimentPlan:
    """A grid of training runs.

    Attributes
    ----------
    data : DataConfig
    train : TrainConfig
        Base configuration; ``mode``, ``k_hat``, ``held_out_domain`` and the
        seeds are overwritten per cell.
    k_hats, seeds, modes : tuple
        Sweep axes.
    held_out : tuple of int or 'all'
        Held-out domains; 'all' rotates through every domain.
    output_dir : str
    n_jobs : int
        Number of cells run in parallel processes.
    """
    data: DataConfig
    train: TrainConfig
    k_hats: Tuple[int, ...] = (3,)
    seeds: Tuple[int, ...] = (1,)
    modes: Tuple[str, ...] = ('full',)
    held_out: object = None
    output_dir: str = 'runs'
    n_jobs: int = 1

    def held_out_domains(self):
        if self.held_out is None:
            return (self.data.held_out_domain,)
        if self.held_out == 'all':
            return tuple(range(len(self.data.styles)))
        return tuple(int(d) for d in self.held_out)

    def cells(self):
        return list(itertools.product(self.modes, self.k_hats,
                                      self.held_out_domains(), self.seeds))

    def validate(self):
        for name in ('k_hats', 'seeds', 'modes'):
            if not getattr(self, name):
                raise ValueError('sweep axis {} is empty'.format(name))
        if not self.held_out_domains():
            raise ValueError('sweep axis held_out is empty')
        os.makedirs(self.output_dir, exist_ok=True)
        if not os.access(self.output_dir, os.W_OK):
            raise ValueError('output directory {} is not writable'.format(
                self.output_dir))
        self.data.validate()
        self.train.validate()
        return self


def cell_name(mode, k_hat, held_out_domain, seed):
    return '{}_k{}_d{}_s{}'.format(mode, k_hat, held_out_domain, seed)


def _run_cell(plan, dataset, mode, k_hat, held_out_domain, seed):
    data = dataclasses.replace(plan.data, held_out_domain=held_out_domain,
                               split_seed=seed)
    config = dataclasses.replace(plan.train, mode=mode, k_hat=k_hat,
                                 model_seed=seed, shuffle_seed=seed,
                                 cluster_seed=seed)
    run_dir = os.path.join(plan.output_dir,
                           cell_name(mode, k_hat, held_out_domain, seed))
    os.makedirs(run_dir, exist_ok=True)
    write_config_echo(os.path.join(run_dir, 'config.echo'), data, config)

    splits = make_splits(dataset, held_out_domain, data.val_fraction, seed)
    _, record = train(config, dataset, splits, num_classes=data.num_classes,
                      run_dir=run_dir)
    out = dict(record.summary())
    out.update(mode=mode, k_hat=k_hat, held_out_domain=held_out_domain,
               seed=seed)
    out.pop('type')
    return out


def run_sweep(plan, verbose=True):
    """Runs every cell of ``plan`` and writes ``summary.csv``.

    Returns
    -------
    records : list of dict
        One summary per cell, in cell order.
    table : list of dict
        Aggregate rows, grouped by mode, k_hat and held-out domain.
    """
    plan.validate()
    dataset = generate_dataset(list(plan.data.styles), plan.data.num_classes,
                               plan.data.n_per_domain, plan.data.image_size,
                               seed=plan.data.dataset_seed)
    cells = plan.cells()
    logger.info('running %d cells with n_jobs=%d', len(cells), plan.n_jobs)

    # Results arrive in cell order as cells finish.
    results = Parallel(n_jobs=plan.n_jobs, return_as='generator')(
        delayed(_run_cell)(plan, dataset, *cell) for cell in cells)
    if verbose:
        results = tqdm(results, total=len(cells), desc='Sweep', leave=False)
    records = list(results)

    expected = {(m, k, d) for m, k, d, _ in cells}
    table = aggregate(records, ('mode', 'k_hat', 'held_out_domain'),
                      expected_cells=expected)
    write_summary_csv(table, os.path.join(plan.output_dir, SUMMARY_FILE))
    return records, table


def aggregate(records, group_by=('mode', 'k_hat'), metrics=METRICS,
              expected_cells=None):
    """Mean and population standard deviation of metrics per cell.

    Parameters
    ----------
    records : list of dict
        Run summaries sharing one set of keys.
    group_by : tuple of str
        Keys identifying a cell.
    metrics : tuple of str
        Metrics to aggregate. A metric that is None in every record of a
        cell is reported as None.
    expected_cells : iterable of tuple or None
        Cells that must be present, as tuples of ``group_by`` values.

    Returns
    -------
    rows : list of dict
        Sorted by cell key; ``<metric>_mean`` and ``<metric>_std`` columns
        plus the record count ``n``.

    Raises
    ------
    ValueError
        If ``records`` is empty, their keys differ, a metric is missing in
        some records only, or an expected cell has no record.
    """
    records = list(records)
    if not records:
        raise ValueError('no run records to aggregate')
    schema = set(records[0])
    for i, r in enumerate(records):
        if set(r) != schema:
            raise ValueError('record {} has keys {} but record 0 has {}'
                             .format(i, sorted(r), sorted(schema)))
    missing = [k for k in tuple(group_by) + tuple(metrics) if k not in schema]
    if missing:
        raise ValueError('records lack keys {}'.format(missing))

    groups = dict()
    for r in records:
        groups.setdefault(tuple(r[k] for k in group_by), []).append(r)
    if expected_cells is not None:
        empty = sorted(set(map(tuple, expected_cells)) - set(groups), key=str)
        if empty:
            raise ValueError('no records for cells {}'.format(empty))

    rows = []
    for key in sorted(groups, key=lambda k: tuple(str(v) for v in k)):
        members = groups[key]
        row = dict(zip(group_by, key))
        row['n'] = len(members)
        for m in metrics:
            values = [r[m] for r in members]
            if all(v is None for v in values):
                row[m + '_mean'] = row[m + '_std'] = None
                continue
            if any(v is None for v in values):
                raise ValueError('metric {} is missing in some records of '
                                 'cell {}'.format(m, key))
            values = np.asarray(values, dtype=np.float64)
            row[m + '_mean'] = float(values.mean())
            row[m + '_std'] = float(values.std())
        rows.append(row)
    return rows


def write_summary_csv(rows, path):
    if not rows:
        raise ValueError('no rows to write')
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: '' if v is None else v
                             for k, v in row.items()})
