"""
Versioned binary checkpoints.

Layout (all integers little-endian)::

    magic        8 bytes   b'LDGCKPT\\x00'
    version      uint32
    config_len   uint32
    config       config_len bytes of UTF-8 JSON (model config + training echo)
    n_params     uint32
    per parameter:
        name_len uint16, name (UTF-8)
        ndim     uint8, dims (ndim x uint32)
        values   prod(dims) x float64, little-endian, row-major
"""

import json
import struct

import numpy as np

from latentdg.exceptions import CheckpointError
from latentdg.model import Model, ModelConfig

MAGIC = b'LDGCKPT\x00'
VERSION = 1


def save_checkpoint(model, path, train_config=None):
    """Writes ``model`` parameters and configuration to ``path``.

    Parameters
    ----------
    model : Model
    path : str or path-like
    train_config : dict or None
        Optional training configuration echo stored alongside.
    """
    header = {'model': model.config.to_dict(), 'train': train_config or {}}
    blob = json.dumps(header, sort_keys=True).encode('utf-8')

    chunks = [MAGIC, struct.pack('<II', VERSION, len(blob)), blob]
    params = model.parameters()
    chunks.append(struct.pack('<I', len(params)))
    for p in params:
        name = p.name.encode('utf-8')
        chunks.append(struct.pack('<H', len(name)))
        chunks.append(name)
        chunks.append(struct.pack('<B', p.data.ndim))
        chunks.append(struct.pack('<{}I'.format(p.data.ndim), *p.data.shape))
        chunks.append(np.ascontiguousarray(p.data, dtype='<f8').tobytes())

    with open(path, 'wb') as f:
        f.write(b''.join(chunks))


class _Reader(object):

    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError(
                'truncated checkpoint: needed {} bytes at offset {}, file has '
                '{}'.format(n, self.pos, len(self.buf)))
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path):
    """Parses a checkpoint file without building a model.

    Returns
    -------
    header : dict
        ``{'model': ..., 'train': ...}`` configuration echo.
    state : dict
        Parameter name to ndarray.

    Raises
    ------
    CheckpointError
        On bad magic, unsupported version, truncation or trailing bytes.
    """
    with open(path, 'rb') as f:
        reader = _Reader(f.read())

    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError('{} is not a latentdg checkpoint'.format(path))
    version, blob_len = reader.unpack('<II')
    if version != VERSION:
        raise CheckpointError('unsupported checkpoint version {} (expected {})'
                              .format(version, VERSION))
    try:
        header = json.loads(reader.take(blob_len).decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as err:
        raise CheckpointError('corrupt checkpoint header: {}'.format(err))

    state = dict()
    n_params, = reader.unpack('<I')
    for _ in range(n_params):
        name_len, = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8', errors='replace')
        ndim, = reader.unpack('<B')
        shape = reader.unpack('<{}I'.format(ndim))
        count = int(np.prod(shape))
        values = np.frombuffer(reader.take(8 * count), dtype='<f8')
        state[name] = values.reshape(shape).astype(np.float64)

    if reader.pos != len(reader.buf):
        raise CheckpointError('trailing bytes after parameter table')
    return header, state


def load_checkpoint(path, expected_config=None):
    """Restores a model saved with ``save_checkpoint``.

    Parameters
    ----------
    path : str or path-like
    expected_config : ModelConfig or None
        If given, the stored architecture must match it exactly.

    Returns
    -------
    model : Model

    Raises
    ------
    CheckpointError
        If the file is corrupt, truncated, of another version, or its
        configuration differs from ``expected_config``.
    """
    header, state = read_checkpoint(path)
    try:
        config = ModelConfig.from_dict(header['model'])
    except (KeyError, TypeError) as err:
        raise CheckpointError('corrupt model config in checkpoint: {}'.format(
            err))

    if expected_config is not None and config != expected_config:
        diffs = [k for k in expected_config.to_dict()
                 if getattr(config, k) != getattr(expected_config, k)]
        raise CheckpointError('checkpoint config differs in {}'.format(diffs))

    model = Model(config, random_state=0)
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as err:
        raise CheckpointError('parameter table does not match config: {}'
                              .format(err))
    return model
