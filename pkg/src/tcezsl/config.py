"""
    tcezsl.config
    ~~~~~~~~~~~~~

    Flat ``key = value`` configuration files and run manifests::

        # tce on the synthetic set
        model = tce
        max_epochs = 300
        lambda_rvc = 0.01

    Keys are the fields of :class:`~tcezsl.trainer.TrainConfig` and
    :class:`~tcezsl.losses.LossWeights`. Command-line flags override file
    values; ``TCE_SEED`` supplies the seed when neither sets it.
"""

from typing import Any, Callable, Dict, Mapping, Optional

from .errors import ConfigError
from .helpers import COMMENT_LINE, CONFIG_LINE
from .losses import LossWeights
from .trainer import TrainConfig
from .util import fmt_float, seed_from_env

#: keys a run manifest carries next to the resolved configuration
META_KEYS = ('command', 'config_path', 'output_dir', 'data', 'checkpoint', 'split', 'tool_version')


def _to_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError('not a boolean: {!r}'.format(text))


def _to_optional_float(text: str) -> Optional[float]:
    if text.strip().lower() in ('', 'none', 'default'):
        return None
    return float(text)


KEY_TYPES: Dict[str, Callable[[str], Any]] = {
    'model': str,
    'max_epochs': int,
    'batch_size': int,
    'lr_main': float,
    'lr_attr_table': float,
    'seed': int,
    'eval_every': int,
    'latent_dim': int,
    'word_dim': int,
    'hidden_dim': int,
    'weight_decay': _to_optional_float,
    'rvc_frozen_semantics': _to_bool,
    'rvc_include_unseen': _to_bool,
    'auc_smax_mode': str,
    'bins': int,
    'threads': int,
    'lambda_cls': float,
    'lambda_tri': float,
    'lambda_rec': float,
    'lambda_op': float,
    'lambda_rvc': float,
    'm_o': float,
    'm_c': float,
    'm_r': float,
    'rvc_pairs': int,
}


def parse_config_text(text: str, source: str = '<config>') -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if COMMENT_LINE.match(line):
            continue
        m = CONFIG_LINE.match(line)
        if not m:
            raise ConfigError('{}:{}: expected key = value'.format(source, lineno))
        values[m.group('key')] = m.group('value')
    return values


def load_config(path: str) -> Dict[str, str]:
    with open(path, 'rb') as f:
        text = f.read().decode('utf-8')
    return parse_config_text(text, path)


def coerce(key: str, value: Any) -> Any:
    if key not in KEY_TYPES:
        raise ConfigError('unknown config key {!r}'.format(key))
    if not isinstance(value, str):
        return value
    try:
        return KEY_TYPES[key](value)
    except ValueError:
        raise ConfigError('invalid value {!r} for {}'.format(value, key))


def resolve_config(
    file_values: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """Merge defaults, file values and overrides into one typed snapshot.
    ``None`` overrides are ignored so unset flags keep the file value.
    """
    snapshot = TrainConfig().as_dict()
    if 'seed' not in (file_values or {}) and (overrides or {}).get('seed') is None:
        snapshot['seed'] = seed_from_env(snapshot['seed'])
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key in META_KEYS or value is None:
                continue
            snapshot[key] = coerce(key, value)
    build_config(snapshot)
    return snapshot


def build_config(snapshot: Mapping[str, Any]) -> TrainConfig:
    weights = LossWeights(**{k: snapshot[k] for k in LossWeights.FIELDS if k in snapshot})
    fields = {k: snapshot[k] for k in TrainConfig.FIELDS if k in snapshot}
    return TrainConfig(weights=weights, **fields)


def format_value(value: Any) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return fmt_float(value)
    return str(value)


def write_run_manifest(path: str, meta: Mapping[str, Any], snapshot: Mapping[str, Any]) -> None:
    """Write ``meta`` and the resolved ``snapshot`` as a config file that
    :func:`load_config` reads back.
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for key, value in meta.items():
            f.write('{} = {}\n'.format(key, format_value(value)))
        for key, value in snapshot.items():
            f.write('{} = {}\n'.format(key, format_value(value)))
