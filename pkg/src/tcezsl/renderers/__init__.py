from importlib import import_module
from typing import Iterable, List, Sequence, Tuple, Union, cast

from ..errors import ConfigError
from ..evaluation import MetricsReport
from ..util import fmt_percent
from ._base import BaseRenderer, Token

_renderers = {
    'csv': 'tcezsl.renderers.csv.CsvRenderer',
    'markdown': 'tcezsl.renderers.markdown.MarkdownRenderer',
}

#: columns of the main comparison table
REPORT_COLUMNS = (
    'closed_unseen', 'open_unseen', 'open_seen', 'unseen_hm', 'all_hm',
    'auc', 'attr_acc', 'obj_acc',
)

#: columns of the loss ablation table
ABLATION_COLUMNS = ('attr_acc', 'obj_acc', 'open_unseen', 'open_seen', 'all_hm')


RendererRef = Union[str, BaseRenderer]


def import_renderer(name: RendererRef) -> BaseRenderer:
    if isinstance(name, BaseRenderer):
        return name

    if name in _renderers:
        module_path, cls_name = _renderers[name].rsplit(".", 1)
    elif "." in name:
        module_path, cls_name = name.rsplit(".", 1)
    else:
        raise ConfigError('unknown renderer {!r}, expected one of {}'.format(name, sorted(_renderers)))

    module = import_module(module_path)
    return cast(BaseRenderer, getattr(module, cls_name)())


def table_tokens(
    rows: Iterable[Tuple[str, MetricsReport]], columns: Sequence[str] = REPORT_COLUMNS
) -> List[Token]:
    """Tokens of a results table with one row per labeled report."""
    tokens: List[Token] = [{'type': 'table_head', 'columns': list(columns)}]
    for label, report in rows:
        values = report.as_dict()
        tokens.append({
            'type': 'table_row',
            'label': label,
            'values': [fmt_percent(values[c]) for c in columns],
        })
    return tokens


def render_table(
    rows: Iterable[Tuple[str, MetricsReport]],
    renderer: RendererRef = 'csv',
    columns: Sequence[str] = REPORT_COLUMNS,
) -> str:
    return import_renderer(renderer)(table_tokens(rows, columns))


__all__ = [
    'BaseRenderer', 'import_renderer', 'table_tokens', 'render_table',
    'REPORT_COLUMNS', 'ABLATION_COLUMNS',
]
