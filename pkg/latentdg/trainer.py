"""
Adversarial training with pseudo domain labels.

Each epoch first clusters the style statistics of the (un-augmented)
training images into pseudo domains, aligning the new labels with those of
the previous epoch. It then runs minibatch SGD on the classification,
entropy and adversarial losses, the latter through a gradient reversal
layer whose scale follows the adversarial weight schedule. The model with
the best validation accuracy is kept.
"""

import csv
import dataclasses
import json
import logging
import math
import os

import numpy as np
from tqdm import trange

from latentdg.checkpoint import save_checkpoint
from latentdg.data.augment import AugmentConfig, augment_batch, standardize
from latentdg.data.splits import select
from latentdg.data.synthetic import sample_labels, stack_images
from latentdg.domains import PseudoDomainState, reassign
from latentdg.exceptions import ConfigError, DivergenceError
from latentdg.losses import compute_losses, lambda_schedule
from latentdg.model import Model, extract_tap_activations, forward_all
from latentdg.nn import SGD, backward, step_lr
from latentdg.style import ddf, fit_reduction, flat_features
from latentdg.utils import check_random_state

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.jsonl'
CHECKPOINT_FILE = 'checkpoint.bin'
CLUSTERS_FILE = 'clusters.csv'
CLUSTER_COLUMNS = ('epoch', 'inertia', 'agreement', 'cluster_sizes',
                   'nmi_domain', 'nmi_category', 'nmi_prev')


def cluster_row(entry):
    """One ``clusters.csv`` row of an epoch entry; sizes are ';'-joined."""
    row = [entry[c] for c in CLUSTER_COLUMNS]
    sizes = entry['cluster_sizes']
    row[3] = '' if sizes is None else ';'.join(str(s) for s in sizes)
    return ['' if v is None else v for v in row]


@dataclasses.dataclass
class RunRecord:
    """Everything measured during one training run.

    Attributes
    ----------
    epochs : list of dict
        One entry per epoch with mean losses, learning rates, accuracies
        and cluster diagnostics.
    progress_trace, lambda_trace : list of float
        Training progress and adversarial weight of every optimizer step.
    lr_trace : list of float
        Backbone learning rate of every epoch.
    selected_epoch : int or None
        Epoch with the best validation accuracy, earliest on ties.
    """
    config: dict
    epochs: list = dataclasses.field(default_factory=list)
    progress_trace: list = dataclasses.field(default_factory=list)
    lambda_trace: list = dataclasses.field(default_factory=list)
    lr_trace: list = dataclasses.field(default_factory=list)
    selected_epoch: int = None

    def selected(self):
        return self.epochs[self.selected_epoch]

    def summary(self):
        best = self.selected()
        return {
            'type': 'summary',
            'mode': self.config.get('mode'),
            'k_hat': self.config.get('k_hat'),
            'selected_epoch': self.selected_epoch,
            'val_acc': best['val_acc'],
            'target_acc': best['target_acc'],
            'nmi_domain': best['nmi_domain'],
            'nmi_category': best['nmi_category'],
            'final_target_acc': self.epochs[-1]['target_acc'],
        }

    def jsonl_lines(self):
        lines = [json.dumps(e, sort_keys=True) for e in self.epochs]
        lines.append(json.dumps(self.summary(), sort_keys=True))
        return lines

    def write_jsonl(self, path):
        with open(path, 'w') as f:
            f.write('\n'.join(self.jsonl_lines()) + '\n')


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Evaluation.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def accuracy(model, images, labels, batch_size=256):
    """Fraction of standardized ``images`` whose top class equals ``labels``.

    Raises
    ------
    ValueError
        If the set is empty.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError('cannot evaluate accuracy on an empty set')
    logits = model.predict(images, batch_size=batch_size)
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def evaluate(model, samples, augment_config=None, batch_size=256):
    """Accuracy of ``model`` on a list of samples, without augmentation."""
    if not samples:
        raise ValueError('cannot evaluate accuracy on an empty set')
    images = standardize(stack_images(samples), augment_config)
    categories, _ = sample_labels(samples)
    return accuracy(model, images, categories, batch_size)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Domain features.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def style_rows(model, images, config, use_stats=True, batch_size=256):
    """Unreduced clustering features of standardized ``images``.

    Style statistics of the tap layers, or with ``use_stats=False`` the
    activations of every tap, flattened, concatenated and pooled to
    ``config.flat_dim`` values.
    """
    rows = []
    for start in range(0, images.shape[0], batch_size):
        taps = extract_tap_activations(model, images[start:start + batch_size])
        if use_stats:
            rows.append(ddf(taps, config.epsilon,
                            model.config.tap_layers).rows)
        else:
            rows.append(flat_features(taps, config.flat_dim))
    return np.concatenate(rows, axis=0)


def domain_features(model, images, config, use_stats=True, batch_size=256,
                    reduction=None):
    """Reduced clustering features of standardized ``images``.

    Parameters
    ----------
    reduction : Reduction or None
        A previously fitted projection; None fits one on these features.
    """
    rows = style_rows(model, images, config, use_stats, batch_size)
    if reduction is None:
        reduction = fit_reduction(rows, config.target_dim)
    return reduction.apply(rows)


def _remap(values):
    """Maps arbitrary labels onto 0..n-1 in sorted order."""
    uniques, inverse = np.unique(values, return_inverse=True)
    return inverse.astype(np.int64), uniques.size


def _nmi_or_none(state, other):
    return None if state is None else state.nmi_with(other)


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Training.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def train(config, dataset, splits, num_classes=None, augment_config=None,
          run_dir=None, verbose=False):
    """Trains a model on the source samples of ``splits``.

    Parameters
    ----------
    config : TrainConfig
    dataset : list of Sample
    splits : DatasetSplit
    num_classes : int or None
        Defaults to one more than the largest category in ``dataset``.
    augment_config : AugmentConfig or None
    run_dir : str or None
        If given, ``metrics.jsonl`` (and ``clusters.csv`` when pseudo
        domains are used) is appended every epoch and the
        selected model is written to ``checkpoint.bin``.
    verbose : bool
        Whether to show a progress bar.

    Returns
    -------
    model : Model
        Parameters of the selected epoch.
    record : RunRecord

    Raises
    ------
    DivergenceError
        If a loss or gradient becomes non-finite.
    """
    config.validate()
    augment_config = (augment_config or AugmentConfig()).validate()
    loss_config = config.loss_config()
    mode = config.mode

    train_samples = select(dataset, splits.train)
    val_samples = select(dataset, splits.val)
    target_samples = select(dataset, splits.target)
    if not train_samples:
        raise ValueError('training split is empty')
    if num_classes is None:
        num_classes = max(s.category for s in dataset) + 1

    raw_images = stack_images(train_samples)
    images = standardize(raw_images, augment_config)
    categories, domains = sample_labels(train_samples)
    n_samples = images.shape[0]

    def _eval_arrays(samples):
        if not samples:
            return None, None
        labels, _ = sample_labels(samples)
        return standardize(stack_images(samples), augment_config), labels

    val_images, val_labels = _eval_arrays(val_samples)
    target_images, target_labels = _eval_arrays(target_samples)

    n_labels = config.k_hat
    true_domains = None
    if mode == 'no_clus':
        true_domains, n_labels = _remap(domains)
        if n_labels < 2:
            raise ConfigError('mode no_clus needs at least 2 source domains, '
                              'got {}'.format(n_labels))

    model = Model(config.model_config(num_classes, images.shape[-1],
                                      n_labels),
                  random_state=config.model_seed)
    optimizer = SGD(model.parameters(), config.base_lr, config.momentum,
                    config.weight_decay)
    shuffle_rs = check_random_state(config.shuffle_seed)
    cluster_rs = check_random_state(config.cluster_seed)

    record = RunRecord(config=dataclasses.asdict(config))
    steps_per_epoch = int(math.ceil(n_samples / config.batch_size))
    total_steps = config.epochs * steps_per_epoch
    step = 0

    metrics_path = clusters_path = None
    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        metrics_path = os.path.join(run_dir, METRICS_FILE)
        open(metrics_path, 'w').close()
        if loss_config.use_adv:
            clusters_path = os.path.join(run_dir, CLUSTERS_FILE)
            with open(clusters_path, 'w', newline='') as f:
                csv.writer(f).writerow(CLUSTER_COLUMNS)

    state, reduction = None, None
    best_val, best_params = -np.inf, None
    epochs = trange(config.epochs, desc='Training ({})'.format(mode),
                    leave=False) if verbose else range(config.epochs)

    for epoch in epochs:
        lr = step_lr(config.base_lr, epoch, config.epochs,
                     config.lr_decay_factor, config.lr_decay_at)
        record.lr_trace.append(lr)

        # Pseudo domain labels are frozen for the rest of the epoch.
        if loss_config.use_adv:
            if mode == 'no_clus':
                if state is None:
                    state = PseudoDomainState.from_labels(true_domains,
                                                          n_labels)
            elif mode != 'no_iter' or state is None:
                if state is None:
                    state = PseudoDomainState.initial(n_samples, n_labels)
                rows = style_rows(model, images, config,
                                  use_stats=mode != 'no_stat')
                if reduction is None or config.refit_reduction:
                    reduction = fit_reduction(rows, config.target_dim)
                features = reduction.apply(rows)
                state = reassign(state, features, n_labels, cluster_rs,
                                 align=epoch > 0 or config.align_first_epoch,
                                 max_iter=config.kmeans_max_iter,
                                 tol=config.kmeans_tol)

        totals = np.zeros(4)
        order = shuffle_rs.permutation(n_samples)
        for start in range(0, n_samples, config.batch_size):
            idx = order[start:start + config.batch_size]
            if config.augment:
                x = augment_batch(raw_images[idx], shuffle_rs, augment_config)
            else:
                x = images[idx]

            p = step / total_steps
            lam = lambda_schedule(p, config.lambda_gamma)
            record.progress_trace.append(p)
            record.lambda_trace.append(lam)

            if loss_config.use_adv:
                class_logits, domain_logits, _ = forward_all(model, x, lam)
                total, report = compute_losses(
                    class_logits, categories[idx], lam, loss_config,
                    domain_logits, state.labels[idx], state.cluster_sizes)
            else:
                features, _ = model.extract(x)
                total, report = compute_losses(
                    model.classify(features), categories[idx], lam,
                    loss_config)

            if not report.is_finite():
                raise DivergenceError('non-finite loss {}'.format(
                    report.as_dict()), epoch=epoch, step=step)
            backward(total)
            try:
                optimizer.step(lr)
            except DivergenceError as err:
                raise DivergenceError(str(err), epoch=epoch, step=step)

            totals += len(idx) * np.array(
                [report.l_cls, report.l_adv, report.l_ent, report.total])
            logger.debug('epoch %d step %d: %s', epoch, step,
                         report.as_dict())
            step += 1

        totals /= n_samples
        entry = {
            'type': 'epoch',
            'epoch': epoch,
            'lr': lr,
            'head_lr': lr * config.head_lr_multiplier,
            'lambda': record.lambda_trace[-1],
            'l_cls': totals[0],
            'l_adv': totals[1],
            'l_ent': totals[2],
            'total': totals[3],
            'train_acc': accuracy(model, images, categories),
            'val_acc': None if val_images is None else accuracy(
                model, val_images, val_labels),
            'target_acc': None if target_images is None else accuracy(
                model, target_images, target_labels),
            'inertia': None if state is None else state.inertia,
            'agreement': None if state is None else state.agreement,
            'cluster_sizes': None if state is None else
            state.cluster_sizes.tolist(),
            'nmi_domain': _nmi_or_none(state, domains),
            'nmi_category': _nmi_or_none(state, categories),
            'nmi_prev': _nmi_or_none(state, None if state is None else
                                     state.prev_labels),
        }
        entry = {k: float(v) if isinstance(v, np.floating) else v
                 for k, v in entry.items()}
        record.epochs.append(entry)
        if metrics_path is not None:
            with open(metrics_path, 'a') as f:
                f.write(json.dumps(entry, sort_keys=True) + '\n')
        if clusters_path is not None:
            with open(clusters_path, 'a', newline='') as f:
                csv.writer(f).writerow(cluster_row(entry))

        # Without validation data the last epoch is selected.
        if entry['val_acc'] is None or entry['val_acc'] > best_val:
            best_val = -np.inf if entry['val_acc'] is None \
                else entry['val_acc']
            best_params = model.state_dict()
            record.selected_epoch = epoch

        if state is not None:
            state = state.end_epoch()

        logger.info('epoch %d/%d: loss %.4f, train %.3f, val %s, target %s, '
                    'nmi(domain) %s', epoch + 1, config.epochs, entry['total'],
                    entry['train_acc'], entry['val_acc'], entry['target_acc'],
                    entry['nmi_domain'])

    if verbose:
        epochs.close()

    model.load_state_dict(best_params)
    if run_dir is not None:
        with open(metrics_path, 'a') as f:
            f.write(json.dumps(record.summary(), sort_keys=True) + '\n')
        save_checkpoint(model, os.path.join(run_dir, CHECKPOINT_FILE),
                        train_config=record.config)
    return model, record
