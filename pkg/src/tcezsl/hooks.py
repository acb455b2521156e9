import csv
from collections import Counter
from typing import TYPE_CHECKING, List

from .losses import LossBreakdown
from .util import fmt_float

if TYPE_CHECKING:
    from .trainer import EpochRecord, Trainer, TrainState

LOG_COLUMNS = ('epoch',) + LossBreakdown.TERMS + ('total',)


def add_csv_log_hook(trainer: "Trainer", path: str) -> None:
    """Write one CSV row of loss means per epoch into ``path``::

        trainer = Trainer(config)
        add_csv_log_hook(trainer, 'out/train_log.csv')
        trainer.fit(dataset)

    The file is truncated when the first epoch starts.
    """
    def start_hook(trainer: "Trainer", state: "TrainState") -> None:
        if state.epoch != 1:
            return
        with open(path, 'w', encoding='utf-8', newline='') as f:
            csv.writer(f, lineterminator='\n').writerow(LOG_COLUMNS)

    def epoch_hook(trainer: "Trainer", state: "TrainState", record: "EpochRecord") -> None:
        values = record.losses.as_dict()
        row = [str(record.epoch)] + [fmt_float(values[key]) for key in LOG_COLUMNS[1:]]
        with open(path, 'a', encoding='utf-8', newline='') as f:
            csv.writer(f, lineterminator='\n').writerow(row)
        state.env['csv_log'] = path

    trainer.before_epoch_hooks.append(start_hook)
    trainer.after_epoch_hooks.append(epoch_hook)


def add_loss_history_hook(trainer: "Trainer") -> None:
    """Keep every step's :class:`LossBreakdown` in ``state.env['loss_history']``."""
    def step_hook(trainer: "Trainer", state: "TrainState", losses: LossBreakdown) -> None:
        history: List[LossBreakdown] = state.env.setdefault('loss_history', [])
        history.append(losses)

    trainer.after_step_hooks.append(step_hook)


def add_access_audit_hook(trainer: "Trainer") -> None:
    """Record the dataset's split reads after every step in
    ``state.env['step_access']``, keyed by step number.
    """
    def step_hook(trainer: "Trainer", state: "TrainState", losses: LossBreakdown) -> None:
        audit = state.env.setdefault('step_access', {})
        audit[state.step] = Counter(state.dataset.access_log)

    trainer.after_step_hooks.append(step_hook)
