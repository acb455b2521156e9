"""
    tcezsl.trainer
    ~~~~~~~~~~~~~~

    Mini-batch training with Adam, validation-based model selection, the
    loss ablation matrix and ratio-variance sensitivity sweeps.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Mapping, MutableMapping, Optional, Sequence, Tuple

from .dataforge import Dataset, make_batch
from .diffcore import AdamState, Params, adam_step
from .errors import ConfigError, NumericError, PreconditionError
from .evaluation import CurvePoint, MetricsReport, SmaxMode, evaluate_scores
from .losses import ABLATION_VARIANTS, LossBreakdown, LossWeights, ablation_weights
from .models import ModelRef, import_model
from .models._base import BaseModel
from .util import rng_stream

log = logging.getLogger(__name__)

SMAX_MODES = ('global', 'per_image')


class TrainConfig:
    """Training and model settings. Loss weights live in ``weights`` and
    are flattened into :meth:`as_dict` next to the other fields.
    """

    FIELDS = (
        'model', 'max_epochs', 'batch_size', 'lr_main', 'lr_attr_table', 'seed',
        'eval_every', 'latent_dim', 'word_dim', 'hidden_dim', 'weight_decay',
        'rvc_frozen_semantics', 'rvc_include_unseen', 'auc_smax_mode', 'bins',
        'threads',
    )

    def __init__(
        self,
        model: str = 'tce',
        max_epochs: int = 1200,
        batch_size: int = 512,
        lr_main: float = 1e-4,
        lr_attr_table: float = 1e-5,
        seed: int = 0,
        eval_every: int = 10,
        latent_dim: int = 256,
        word_dim: int = 300,
        hidden_dim: int = 512,
        weight_decay: Optional[float] = None,
        rvc_frozen_semantics: bool = False,
        rvc_include_unseen: bool = False,
        auc_smax_mode: SmaxMode = 'global',
        bins: int = 100,
        threads: int = 1,
        weights: Optional[LossWeights] = None,
    ) -> None:
        self.model = model
        self.max_epochs = int(max_epochs)
        self.batch_size = int(batch_size)
        self.lr_main = float(lr_main)
        self.lr_attr_table = float(lr_attr_table)
        self.seed = int(seed)
        self.eval_every = int(eval_every)
        self.latent_dim = int(latent_dim)
        self.word_dim = int(word_dim)
        self.hidden_dim = int(hidden_dim)
        self.weight_decay = None if weight_decay is None else float(weight_decay)
        self.rvc_frozen_semantics = bool(rvc_frozen_semantics)
        self.rvc_include_unseen = bool(rvc_include_unseen)
        self.auc_smax_mode: SmaxMode = auc_smax_mode
        self.bins = int(bins)
        self.threads = int(threads)
        self.weights = weights if weights is not None else LossWeights()
        self.validate()

    def validate(self) -> None:
        for key in ('max_epochs', 'batch_size', 'eval_every', 'latent_dim', 'word_dim', 'hidden_dim', 'threads'):
            if getattr(self, key) <= 0:
                raise ConfigError('{} must be positive'.format(key))
        if self.lr_main < 0 or self.lr_attr_table < 0:
            raise ConfigError('learning rates must be nonnegative')
        if self.weight_decay is not None and self.weight_decay < 0:
            raise ConfigError('weight_decay must be nonnegative')
        if self.auc_smax_mode not in SMAX_MODES:
            raise ConfigError('auc_smax_mode must be one of {}'.format(', '.join(SMAX_MODES)))
        if self.bins < 2:
            raise ConfigError('bins must be at least 2')

    def replace(self, **kwargs: Any) -> 'TrainConfig':
        """Copy with fields changed; loss weight keys are accepted too."""
        values = {key: getattr(self, key) for key in self.FIELDS}
        weight_changes = {k: kwargs.pop(k) for k in list(kwargs) if k in LossWeights.FIELDS}
        unknown = set(kwargs) - set(self.FIELDS) - {'weights'}
        if unknown:
            raise ConfigError('unknown config keys: {}'.format(', '.join(sorted(unknown))))
        values.update(kwargs)
        weights = values.pop('weights', None) or self.weights
        if weight_changes:
            weights = weights.replace(**weight_changes)
        return TrainConfig(weights=weights, **values)

    def as_dict(self) -> Dict[str, Any]:
        values = {key: getattr(self, key) for key in self.FIELDS}
        values.update(self.weights.as_dict())
        return values

    def __repr__(self) -> str:
        return '<TrainConfig {}>'.format(self.as_dict())


class EpochRecord:
    def __init__(self, epoch: int, losses: LossBreakdown, samples: int) -> None:
        self.epoch = epoch
        #: sample-weighted means over the epoch's batches
        self.losses = losses
        self.samples = samples


class TrainLog:
    """Per-epoch loss means, validation snapshots and the selected epoch."""

    def __init__(self) -> None:
        self.epochs: List[EpochRecord] = []
        self.validations: List[Tuple[int, MetricsReport]] = []
        self.best_epoch: Optional[int] = None

    @property
    def best_report(self) -> Optional[MetricsReport]:
        for epoch, report in self.validations:
            if epoch == self.best_epoch:
                return report
        return None


class TrainState:
    """Mutable progress of one :meth:`Trainer.fit` call, handed to hooks."""

    def __init__(self, model: BaseModel, dataset: Dataset, config: TrainConfig) -> None:
        self.model = model
        self.dataset = dataset
        self.config = config
        self.epoch = 0
        self.step = 0
        self.log = TrainLog()
        self.env: MutableMapping[str, Any] = {}


BeforeEpochHook = Callable[['Trainer', TrainState], None]
AfterStepHook = Callable[['Trainer', TrainState, LossBreakdown], None]
AfterEpochHook = Callable[['Trainer', TrainState, EpochRecord], None]
AfterEvalHook = Callable[['Trainer', TrainState, MetricsReport], None]


class Trainer:
    """Train a model on the train split of a dataset::

        trainer = Trainer(TrainConfig(max_epochs=50, batch_size=128))
        add_csv_log_hook(trainer, 'train_log.csv')
        model, log = trainer.fit(dataset)

    :param config: training settings
    """

    def __init__(self, config: Optional[TrainConfig] = None) -> None:
        self.config = config or TrainConfig()
        self.before_epoch_hooks: List[BeforeEpochHook] = []
        self.after_step_hooks: List[AfterStepHook] = []
        self.after_epoch_hooks: List[AfterEpochHook] = []
        self.after_eval_hooks: List[AfterEvalHook] = []

    def build_model(
        self, dataset: Dataset, model: Optional[ModelRef] = None, **options: Any
    ) -> BaseModel:
        cfg = self.config
        factory = import_model(model or cfg.model)
        options.setdefault('rvc_include_unseen', cfg.rvc_include_unseen)
        options.setdefault('rvc_frozen_semantics', cfg.rvc_frozen_semantics)
        return factory(
            dataset.space,
            dataset.feature_dim,
            word_dim=cfg.word_dim,
            latent_dim=getattr(cfg, factory.LATENT_KEY),
            rng=rng_stream(cfg.seed, 'init'),
            words=dataset.word_vectors,
            **options
        )

    def optimizer(self, model: BaseModel) -> AdamState:
        cfg = self.config
        decay = cfg.weight_decay
        if decay is None:
            decay = model.DEFAULT_WEIGHT_DECAY
        return AdamState(
            model.parameters(),
            lr=cfg.lr_main,
            lr_groups=model.lr_groups(cfg.lr_attr_table),
            weight_decay=decay,
        )

    def fit(self, dataset: Dataset, model: Optional[BaseModel] = None) -> Tuple[BaseModel, TrainLog]:
        cfg = self.config
        weights = cfg.weights
        if model is None:
            model = self.build_model(dataset)
        params = model.parameters()
        opt = self.optimizer(model)
        train = dataset.split('train', purpose='train')
        if not len(train):
            raise PreconditionError('the train split is empty')

        sampling = rng_stream(cfg.seed, 'sampling')
        state = TrainState(model, dataset, cfg)
        use_rvc = model.uses_rvc() and weights.lambda_rvc > 0
        validate = dataset.count('val') > 0
        best_hm = -math.inf
        best: Optional[Params] = None

        for epoch in range(1, cfg.max_epochs + 1):
            state.epoch = epoch
            for hook in self.before_epoch_hooks:
                hook(self, state)

            order = sampling.permutation(len(train))
            sums = dict.fromkeys(LossBreakdown.TERMS + ('total',), 0.0)
            for start in range(0, len(train), cfg.batch_size):
                rows = order[start:start + cfg.batch_size]
                batch = make_batch(train, rows, dataset.space, sampling)
                if use_rvc:
                    batch.rvc_pairs = model.sample_rvc_pairs(weights.rvc_pairs, sampling)
                losses, grads = model.loss_and_grads(batch, weights)
                for term, value in losses.as_dict().items():
                    if not math.isfinite(value):
                        raise NumericError(
                            'non-finite {} loss at epoch {} step {}'.format(term, epoch, state.step + 1),
                            term=term,
                        )
                    sums[term] += value * len(batch)
                adam_step(params, grads, opt)
                model.mark_updated()
                state.step += 1
                for hook2 in self.after_step_hooks:
                    hook2(self, state, losses)

            total = sums.pop('total') / len(train)
            means = LossBreakdown(total=total, **{k: v / len(train) for k, v in sums.items()})
            record = EpochRecord(epoch, means, len(train))
            state.log.epochs.append(record)
            log.info('epoch %d loss %.6f', epoch, means.total)
            for hook3 in self.after_epoch_hooks:
                hook3(self, state, record)

            if validate and (epoch % cfg.eval_every == 0 or epoch == cfg.max_epochs):
                report, _ = evaluate(
                    model, dataset, 'val', bins=cfg.bins, smax_mode=cfg.auc_smax_mode,
                    threads=cfg.threads, purpose='validation',
                )
                state.log.validations.append((epoch, report))
                log.info('epoch %d validation all_hm %.2f', epoch, report.all_hm)
                if report.all_hm > best_hm:
                    best_hm = report.all_hm
                    best = model.snapshot()
                    state.log.best_epoch = epoch
                    log.info('new best model at epoch %d', epoch)
                for hook4 in self.after_eval_hooks:
                    hook4(self, state, report)

        if best is not None:
            model.restore(best)
        return model, state.log


def train(
    dataset: Dataset, config: Optional[TrainConfig] = None
) -> Tuple[BaseModel, TrainLog]:
    return Trainer(config).fit(dataset)


def evaluate(
    model: BaseModel,
    dataset: Dataset,
    split: str = 'test',
    bins: int = 100,
    smax_mode: SmaxMode = 'global',
    threads: int = 1,
    purpose: str = 'eval',
) -> Tuple[MetricsReport, Optional[List[CurvePoint]]]:
    view = dataset.split(split, purpose=purpose)
    if not len(view):
        raise PreconditionError('the {} split is empty'.format(split))
    scores = model.score(view.features, threads=threads)
    return evaluate_scores(scores, view.labels, bins=bins, smax_mode=smax_mode)


class AblationRow:
    def __init__(
        self, label: str, active: Sequence[str], report: MetricsReport, losses: LossBreakdown
    ) -> None:
        self.label = label
        self.active = tuple(active)
        self.report = report
        #: loss means of the final epoch
        self.losses = losses


def ablation_matrix(
    dataset: Dataset,
    base_config: TrainConfig,
    variants: Mapping[str, Sequence[str]] = ABLATION_VARIANTS,
    split: str = 'test',
) -> List[AblationRow]:
    """Train one model per loss subset and evaluate it on ``split``."""
    rows = []
    for label, active in variants.items():
        weights = ablation_weights(base_config.weights, active)
        config = base_config.replace(weights=weights)
        log.info('ablation %s', label)
        model, train_log = train(dataset, config)
        report, _ = evaluate(
            model, dataset, split, bins=config.bins, smax_mode=config.auc_smax_mode,
            threads=config.threads,
        )
        rows.append(AblationRow(label, active, report, train_log.epochs[-1].losses))
    return rows


SWEEP_KEYS = ('rvc_pairs', 'm_r')


def rvc_sweep(
    dataset: Dataset, base_config: TrainConfig, key: str, values: Sequence[float]
) -> List[Tuple[float, MetricsReport]]:
    """Train one model per value of ``rvc_pairs`` or ``m_r`` and return the
    validation report of each selected model.
    """
    if key not in SWEEP_KEYS:
        raise ConfigError('sweep key must be one of {}'.format(', '.join(SWEEP_KEYS)))
    results = []
    for value in values:
        config = base_config.replace(**{key: value})
        model, _ = train(dataset, config)
        report, _ = evaluate(
            model, dataset, 'val', bins=config.bins, smax_mode=config.auc_smax_mode,
            threads=config.threads, purpose='validation',
        )
        log.info('sweep %s=%s all_hm %.2f', key, value, report.all_hm)
        results.append((value, report))
    return results
