import os
from typing import Dict

import numpy as np

from .errors import ConfigError

#: named random sub-streams derived from a single seed
SEED_STREAMS: Dict[str, int] = {
    'data': 1,
    'split': 2,
    'init': 3,
    'sampling': 4,
    'fallback': 5,
}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Return the generator of the named sub-stream for ``seed``. Each
    component draws from its own stream, so perturbing one of them does
    not shift the others::

        init_rng = rng_stream(7, 'init')
        sampling_rng = rng_stream(7, 'sampling')
    """
    return np.random.default_rng([int(seed), SEED_STREAMS[name]])


def seed_from_env(default: int = 0) -> int:
    value = os.environ.get('TCE_SEED')
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigError('TCE_SEED must be an integer, got {!r}'.format(value))


def fmt_float(value: float) -> str:
    """Shortest text that parses back to the identical float."""
    return repr(float(value))


def fmt_percent(value: float) -> str:
    return '{:.2f}'.format(value)
