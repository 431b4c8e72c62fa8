"""
Training objective: classification, adversarial and entropy losses and the
adversarial weight schedule.

The total objective is::

    L = L_cls + lambda * L_ent + L_adv(GRL_lambda(features))

The adversarial term is computed on discriminator logits produced behind a
gradient reversal layer, so one backward pass descends on the discriminator
and ascends on the feature extractor.
"""

import dataclasses
import math
import warnings

import numpy as np

from latentdg.exceptions import ConfigError
from latentdg.nn import functional as F

ENTROPY_SIGNS = ('minimize', 'literal')


@dataclasses.dataclass
class LossConfig:
    """Switches and constants of the objective.

    Attributes
    ----------
    use_adv : bool
        Include the adversarial pseudo-domain loss.
    use_ent : bool
        Include the entropy loss.
    lambda_gamma : float
        Steepness of the adversarial weight schedule.
    inverse_size_weighting : bool
        Weight adversarial terms by the inverse size of their pseudo domain.
    entropy_sign : str
        'minimize' penalizes predictive entropy. 'literal' flips the sign,
        rewarding entropy.
    """
    use_adv: bool = True
    use_ent: bool = True
    lambda_gamma: float = 10.0
    inverse_size_weighting: bool = True
    entropy_sign: str = 'minimize'

    def validate(self):
        if not self.lambda_gamma > 0:
            raise ConfigError('lambda_gamma: must be positive, got {}'.format(
                self.lambda_gamma))
        if self.entropy_sign not in ENTROPY_SIGNS:
            raise ConfigError('entropy_sign: expected one of {}, got {!r}'
                              .format(ENTROPY_SIGNS, self.entropy_sign))
        return self


@dataclasses.dataclass
class LossReport:
    """Scalar loss values of one optimizer step."""
    l_cls: float
    l_adv: float
    l_ent: float
    lam: float
    total: float

    def as_dict(self):
        return {'l_cls': self.l_cls, 'l_adv': self.l_adv,
                'l_ent': self.l_ent, 'lambda': self.lam,
                'total': self.total}

    def is_finite(self):
        return all(math.isfinite(v) for v in dataclasses.astuple(self))


def classification_loss(class_logits, labels):
    """Mean cross-entropy of the class predictions."""
    return F.cross_entropy(class_logits, labels)


def inverse_size_weights(pseudo_labels, cluster_sizes):
    """Per-sample weights ``N / (K * size[label])``.

    Parameters
    ----------
    pseudo_labels : array of int, (batch,)
    cluster_sizes : array of int, (K,)
        Sizes of the pseudo domains over the whole training set.

    Raises
    ------
    ValueError
        If a label in the batch belongs to a pseudo domain of size zero.
    """
    sizes = np.asarray(cluster_sizes, dtype=np.float64)
    labels = np.asarray(pseudo_labels, dtype=np.int64)
    batch_sizes = sizes[labels]
    if np.any(batch_sizes <= 0):
        empty = sorted(set(labels[batch_sizes <= 0].tolist()))
        raise ValueError('pseudo domains {} have recorded size 0'.format(
            empty))
    return sizes.sum() / (sizes.size * batch_sizes)


def adversarial_loss(domain_logits, pseudo_labels, cluster_sizes,
                     weighting=True):
    """Cross-entropy of the pseudo domain predictions.

    With ``weighting`` the per-sample terms are weighted by the inverse
    size of their pseudo domain and normalized by the batch's weight sum.
    """
    n_labels = domain_logits.shape[1]
    if len(cluster_sizes) != n_labels:
        raise ValueError('got {} cluster sizes for {} pseudo domains'.format(
            len(cluster_sizes), n_labels))
    weights = None
    if weighting:
        F._check_labels('adversarial_loss', pseudo_labels,
                        domain_logits.shape[0], n_labels)
        weights = inverse_size_weights(pseudo_labels, cluster_sizes)
    return F.cross_entropy(domain_logits, pseudo_labels, weights)


def entropy_loss(class_logits, sign='minimize'):
    """Mean Shannon entropy of the predictive distribution.

    Parameters
    ----------
    class_logits : Tensor, (batch, C)
    sign : str
        'minimize' returns the entropy, 'literal' its negative.
    """
    if sign not in ENTROPY_SIGNS:
        raise ValueError('sign must be one of {}, got {!r}'.format(
            ENTROPY_SIGNS, sign))
    logp = F.log_softmax(class_logits, axis=1)
    entropy = -F.mean(F.sum(F.exp(logp) * logp, axis=1))
    return entropy if sign == 'minimize' else -entropy


def lambda_schedule(p, gamma=10.0):
    """Adversarial weight ``2 / (1 + exp(-gamma * p)) - 1``.

    Parameters
    ----------
    p : float
        Training progress in [0, 1]. Values outside are clamped with a
        warning.
    gamma : float
    """
    if not 0.0 <= p <= 1.0:
        warnings.warn('training progress {} clamped to [0, 1]'.format(p),
                      RuntimeWarning)
        p = min(max(p, 0.0), 1.0)
    return 2.0 / (1.0 + math.exp(-gamma * p)) - 1.0


def compose_total(l_cls, l_ent, l_adv, lam, config):
    """Sums the enabled terms; ``l_adv`` must already sit behind a GRL.

    ``l_ent`` and ``l_adv`` may be None when their switch is off.
    """
    total = l_cls
    if config.use_ent:
        total = total + lam * l_ent
    if config.use_adv:
        total = total + l_adv
    return total


def compute_losses(class_logits, labels, lam, config, domain_logits=None,
                   pseudo_labels=None, cluster_sizes=None):
    """Evaluates every enabled term of the objective.

    Returns
    -------
    total : Tensor, scalar
        Objective to backpropagate.
    report : LossReport
        Disabled terms are reported as 0.
    """
    l_cls = classification_loss(class_logits, labels)
    l_ent = entropy_loss(class_logits, config.entropy_sign) \
        if config.use_ent else None
    l_adv = None
    if config.use_adv:
        if domain_logits is None:
            raise ValueError('adversarial loss enabled but no domain logits '
                             'were given')
        l_adv = adversarial_loss(domain_logits, pseudo_labels, cluster_sizes,
                                 config.inverse_size_weighting)

    total = compose_total(l_cls, l_ent, l_adv, lam, config)
    report = LossReport(
        l_cls=l_cls.item(),
        l_adv=0.0 if l_adv is None else l_adv.item(),
        l_ent=0.0 if l_ent is None else l_ent.item(),
        lam=float(lam),
        total=total.item(),
    )
    return total, report
