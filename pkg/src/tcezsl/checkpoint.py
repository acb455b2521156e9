"""
    tcezsl.checkpoint
    ~~~~~~~~~~~~~~~~~

    Binary model checkpoints. All integers and floats are little-endian::

        magic        4 bytes   b'TCEZ'
        version      uint32    1
        kind         16 bytes  model name, NUL padded
        m, n         uint32    attribute and object counts
        latent_dim   uint32
        word_dim     uint32
        feature_dim  uint32
        count        uint32    number of tensors
        count times:
            name_len uint16, name (UTF-8), ndim uint8,
            shape    uint32 * ndim,
            data     float64 * prod(shape), row-major

    Tensors are stored in parameter declaration order.
"""

import struct
from typing import BinaryIO, Dict, Optional, Tuple

import numpy as np

from .embedspace import ConceptSpace
from .errors import CompatibilityError, FormatError
from .models import import_model
from .models._base import BaseModel

MAGIC = b'TCEZ'
VERSION = 1
KIND_WIDTH = 16
DIM_KEYS = ('m', 'n', 'latent_dim', 'word_dim', 'feature_dim')

_HEADER = struct.Struct('<4sI16s5II')


class Checkpoint:
    def __init__(self, kind: str, dims: Dict[str, int], tensors: Dict[str, np.ndarray]) -> None:
        self.kind = kind
        self.dims = dims
        self.tensors = tensors


def save_checkpoint(model: BaseModel, path: str) -> None:
    params = model.parameters()
    dims = model.dims()
    kind = model.NAME.encode('ascii')
    if len(kind) > KIND_WIDTH:
        raise FormatError('model name {!r} is too long for a checkpoint'.format(model.NAME))
    with open(path, 'wb') as f:
        f.write(_HEADER.pack(
            MAGIC, VERSION, kind.ljust(KIND_WIDTH, b'\0'),
            *[dims[k] for k in DIM_KEYS], len(params)
        ))
        for name, value in params.items():
            encoded = name.encode('utf-8')
            f.write(struct.pack('<H', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<B', value.ndim))
            f.write(struct.pack('<{}I'.format(value.ndim), *value.shape))
            f.write(np.ascontiguousarray(value, dtype='<f8').tobytes())


def _read(f: BinaryIO, size: int, path: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise FormatError('{}: truncated checkpoint'.format(path))
    return data


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, 'rb') as f:
        head = _read(f, _HEADER.size, path)
        magic, version, kind, m, n, latent, word, feature, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError('{}: not a checkpoint file'.format(path))
        if version != VERSION:
            raise CompatibilityError('{}: unsupported checkpoint version {}'.format(path, version))
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack('<H', _read(f, 2, path))
            name = _read(f, name_len, path).decode('utf-8')
            (ndim,) = struct.unpack('<B', _read(f, 1, path))
            shape: Tuple[int, ...] = struct.unpack('<{}I'.format(ndim), _read(f, 4 * ndim, path))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read(f, 8 * size, path), dtype='<f8')
            tensors[name] = data.astype(np.float64).reshape(shape)
        if f.read(1):
            raise FormatError('{}: trailing bytes after the last tensor'.format(path))
    dims = dict(zip(DIM_KEYS, (m, n, latent, word, feature)))
    return Checkpoint(kind.rstrip(b'\0').decode('ascii'), dims, tensors)


def restore_model(
    path: str, space: ConceptSpace, feature_dim: Optional[int] = None, **options: object
) -> BaseModel:
    """Rebuild the model stored at ``path`` for ``space``. Attribute and
    object counts, and the feature width when given, must match.
    """
    ckpt = load_checkpoint(path)
    dims = ckpt.dims
    if (dims['m'], dims['n']) != (space.m, space.n):
        raise CompatibilityError(
            'checkpoint has {}x{} concepts, data has {}x{}'.format(
                dims['m'], dims['n'], space.m, space.n)
        )
    if feature_dim is not None and dims['feature_dim'] != feature_dim:
        raise CompatibilityError(
            'checkpoint expects {}-dim features, data has {}'.format(dims['feature_dim'], feature_dim)
        )
    factory = import_model(ckpt.kind)
    model = factory(
        space, dims['feature_dim'],
        word_dim=dims['word_dim'], latent_dim=dims['latent_dim'], **options
    )
    model.load_state(ckpt.tensors)
    return model
