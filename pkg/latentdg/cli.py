"""
Command line interface.

Subcommands::

    latentdg gen-data        render the synthetic dataset as PNG + manifest
    latentdg train           run one training
    latentdg sweep           run a grid of trainings and aggregate them
    latentdg eval            accuracy of a checkpoint on a split
    latentdg cluster-report  cluster style statistics without training

Every subcommand accepts ``--config FILE`` with ``key = value`` lines;
flags override file values.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from latentdg.checkpoint import load_checkpoint
from latentdg.clustering import kmeans
from latentdg.config import (MODES, load_config, output_root,
                             write_config_echo)
from latentdg.data.augment import standardize
from latentdg.data.io import export_image_folder, load_image_folder
from latentdg.data.splits import make_splits, select
from latentdg.data.synthetic import generate_dataset, sample_labels, \
    stack_images
from latentdg.diagnostics import nmi
from latentdg.exceptions import CheckpointError
from latentdg.model import build_model, extract_tap_activations
from latentdg.style import ddf, write_ddf_csv
from latentdg.sweep import ExperimentPlan, cell_name, run_sweep
from latentdg.trainer import accuracy, domain_features, train
from latentdg.utils import setup_logging

logger = logging.getLogger('latentdg')

EVAL_ECHO = 'eval.echo'


def parse_int_range(text):
    """Parses '2..4', '2,3,4' or '3' into a tuple of ints."""
    text = text.strip()
    try:
        if '..' in text:
            lo, hi = text.split('..')
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(',') if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError('expected N, N..M or N,M,...; got '
                                         '{!r}'.format(text))
    if not values:
        raise argparse.ArgumentTypeError('empty range {!r}'.format(text))
    return values


def _add_common(parser):
    parser.add_argument('--config', help='key = value config file')
    parser.add_argument('-v', '--verbose', action='count', default=1,
                        help='more logging (repeatable)')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='warnings only')
    data = parser.add_argument_group('data')
    data.add_argument('--styles', help='comma-separated style presets')
    data.add_argument('--num-classes', dest='num_classes', type=int)
    data.add_argument('--n-per-domain', dest='n_per_domain', type=int)
    data.add_argument('--image-size', dest='image_size', type=int)
    data.add_argument('--held-out-domain', dest='held_out_domain', type=int)
    data.add_argument('--val-fraction', dest='val_fraction', type=float)
    data.add_argument('--dataset-seed', dest='dataset_seed', type=int)
    data.add_argument('--data-dir', dest='data_dir',
                      help='load an image folder instead of generating')


def _add_training(parser):
    group = parser.add_argument_group('training')
    group.add_argument('--mode', choices=MODES)
    group.add_argument('--epochs', type=int)
    group.add_argument('--batch-size', dest='batch_size', type=int)
    group.add_argument('--base-lr', dest='base_lr', type=float)
    group.add_argument('--entropy-sign', dest='entropy_sign',
                       choices=('minimize', 'literal'))


_DATA_KEYS = ('styles', 'num_classes', 'n_per_domain', 'image_size',
              'held_out_domain', 'val_fraction', 'dataset_seed')
_TRAIN_KEYS = ('mode', 'epochs', 'batch_size', 'base_lr', 'entropy_sign')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='latentdg',
        description='Domain generalization with pseudo domain labels.')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('gen-data', help='render and export the dataset')
    _add_common(p)
    p.add_argument('--out', help='output directory')

    p = sub.add_parser('train', help='run one training')
    _add_common(p)
    _add_training(p)
    p.add_argument('--k-hat', dest='k_hat', type=int)
    p.add_argument('--seed', type=int,
                   help='model, shuffle, clustering and split seed')
    p.add_argument('--run-dir', dest='run_dir')

    p = sub.add_parser('sweep', help='run a grid of trainings')
    _add_common(p)
    _add_training(p)
    p.add_argument('--k-hat', dest='k_hats', type=parse_int_range,
                   default=None, help="e.g. '2..4'")
    p.add_argument('--seeds', type=int, default=5,
                   help='number of seeds, run as 1..N')
    p.add_argument('--modes', help='comma-separated modes')
    p.add_argument('--held-out', dest='held_out',
                   help="comma-separated domains or 'all'")
    p.add_argument('--out', help='output directory')
    p.add_argument('--jobs', type=int, default=1)

    p = sub.add_parser('eval', help='accuracy of a checkpoint')
    _add_common(p)
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--split', choices=('train', 'val', 'target'),
                   default='target')
    p.add_argument('--seed', type=int, default=None, help='split seed')
    p.add_argument('--out', help='directory for eval.echo; defaults to the '
                   'checkpoint directory')

    p = sub.add_parser('cluster-report',
                       help='cluster style statistics of an untrained model')
    _add_common(p)
    p.add_argument('--k-hat', dest='k_hat', type=int)
    p.add_argument('--seed', type=int, help='model and clustering seed')
    p.add_argument('--out', help='CSV file for the report; the config echo '
                   'is written next to it')
    p.add_argument('--ddf-csv', dest='ddf_csv',
                   help='also dump the unreduced style statistics')
    return parser


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Commands.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _configs(args, extra=None):
    overrides = {k: getattr(args, k, None) for k in _DATA_KEYS + _TRAIN_KEYS}
    overrides.update(extra or {})
    return load_config(args.config, overrides)


def _dataset(args, data):
    if getattr(args, 'data_dir', None):
        return load_image_folder(args.data_dir, image_size=data.image_size)
    return generate_dataset(list(data.styles), data.num_classes,
                            data.n_per_domain, data.image_size,
                            seed=data.dataset_seed)


def _seed_overrides(seed):
    if seed is None:
        return {}
    return {'model_seed': seed, 'shuffle_seed': seed, 'cluster_seed': seed,
            'split_seed': seed}


def cmd_gen_data(args):
    data, train_config = _configs(args)
    out = args.out or os.path.join(output_root(), 'data')
    samples = _dataset(args, data)
    export_image_folder(samples, out)
    write_config_echo(os.path.join(out, 'config.echo'), data, train_config)
    print(os.path.join(out, 'manifest.csv'))


def cmd_train(args):
    extra = _seed_overrides(args.seed)
    extra['k_hat'] = args.k_hat
    data, config = _configs(args, extra)
    run_dir = args.run_dir or os.path.join(
        output_root(), cell_name(config.mode, config.k_hat,
                                 data.held_out_domain, config.model_seed))
    os.makedirs(run_dir, exist_ok=True)
    write_config_echo(os.path.join(run_dir, 'config.echo'), data, config)

    dataset = _dataset(args, data)
    splits = make_splits(dataset, data.held_out_domain, data.val_fraction,
                         data.split_seed)
    _, record = train(config, dataset, splits, num_classes=data.num_classes,
                      run_dir=run_dir, verbose=not args.quiet)
    print(json.dumps(record.summary(), sort_keys=True))


def cmd_sweep(args):
    data, config = _configs(args)
    plan = ExperimentPlan(
        data=data,
        train=config,
        k_hats=args.k_hats or (config.k_hat,),
        seeds=tuple(range(1, args.seeds + 1)),
        modes=tuple(m.strip() for m in args.modes.split(','))
        if args.modes else (config.mode,),
        held_out=None if args.held_out is None else
        ('all' if args.held_out == 'all' else
         tuple(parse_int_range(args.held_out))),
        output_dir=args.out or output_root(),
        n_jobs=args.jobs,
    )
    for mode in plan.modes:
        if mode not in MODES:
            raise ValueError('unknown mode {!r}; expected one of {}'.format(
                mode, MODES))
    write_config_echo(os.path.join(plan.validate().output_dir,
                                   'config.echo'), data, config)
    _, table = run_sweep(plan, verbose=not args.quiet)
    for row in table:
        print(json.dumps(row, sort_keys=True))


def cmd_eval(args):
    data, config = _configs(args, _seed_overrides(args.seed))
    model = load_checkpoint(args.checkpoint)
    if model.config.num_classes != data.num_classes or \
            model.config.image_size != data.image_size:
        raise CheckpointError(
            'checkpoint expects {} classes at size {}, data has {} at {}'
            .format(model.config.num_classes, model.config.image_size,
                    data.num_classes, data.image_size))
    out = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out, exist_ok=True)
    write_config_echo(os.path.join(out, EVAL_ECHO), data, config)

    dataset = _dataset(args, data)
    splits = make_splits(dataset, data.held_out_domain, data.val_fraction,
                         data.split_seed)
    samples = select(dataset, getattr(splits, args.split))
    categories, _ = sample_labels(samples)
    acc = accuracy(model, standardize(stack_images(samples)), categories)
    print(json.dumps({'split': args.split, 'n': len(samples),
                      'accuracy': acc}, sort_keys=True))


def cmd_cluster_report(args):
    extra = _seed_overrides(args.seed)
    extra['k_hat'] = args.k_hat
    data, config = _configs(args, extra)
    out = args.out or os.path.join(output_root(), 'cluster_report.csv')
    if os.path.dirname(out):
        os.makedirs(os.path.dirname(out), exist_ok=True)
    write_config_echo(os.path.splitext(out)[0] + '.echo', data, config)

    dataset = _dataset(args, data)
    categories, domains = sample_labels(dataset)
    model = build_model(config.model_config(int(categories.max()) + 1,
                                            data.image_size),
                        seed=config.model_seed)
    images = standardize(stack_images(dataset))
    features = domain_features(model, images, config)
    result = kmeans(features, config.k_hat, random_state=config.cluster_seed,
                    max_iter=config.kmeans_max_iter, tol=config.kmeans_tol)
    if args.ddf_csv:
        taps = extract_tap_activations(model, images)
        write_ddf_csv(ddf(taps, config.epsilon, model.config.tap_layers),
                      args.ddf_csv)

    report = {
        'n_samples': len(dataset),
        'k_hat': config.k_hat,
        'inertia': result.inertia,
        'cluster_sizes': np.bincount(result.assignments,
                                     minlength=config.k_hat).tolist(),
        'nmi_domain': nmi(result.assignments, domains),
        'nmi_category': nmi(result.assignments, categories),
    }
    with open(out, 'w') as f:
        f.write('n_samples,k_hat,inertia,nmi_domain,nmi_category\n')
        f.write('{n_samples},{k_hat},{inertia},{nmi_domain},'
                '{nmi_category}\n'.format(**report))
    print('NMI(pseudo, domain)   = {:.4f}'.format(report['nmi_domain']))
    print('NMI(pseudo, category) = {:.4f}'.format(report['nmi_category']))
    return report


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'sweep': cmd_sweep,
    'eval': cmd_eval,
    'cluster-report': cmd_cluster_report,
}


def run_command(argv=None):
    """Runs one subcommand and returns the process exit status.

    0 on success, 2 on usage errors, 1 on any failure while running.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 0 if err.code in (0, None) else 2

    setup_logging(0 if args.quiet else args.verbose)
    try:
        COMMANDS[args.command](args)
    except Exception as err:
        logger.error('%s failed: %s: %s', args.command,
                     type(err).__name__, err)
        logger.debug('traceback', exc_info=True)
        return 1
    return 0


def main():
    sys.exit(run_command())
