"""
Weight snapshot files.

Layout (all integers little-endian):

    magic  b'QNEEW'   5 bytes
    version           uint16
    n_arrays          uint32
    per array:
        name length   uint16, then UTF-8 name
        ndim          uint8
        shape         ndim x uint32
        data          float64 little-endian, C order
"""
import logging
import struct
from pathlib import Path
from typing import Dict, Union

import numpy as np

from quantum.exceptions import OutputError

logger = logging.getLogger('estimator')

MAGIC = b'QNEEW'
VERSION = 1


def dumps(weights: Dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack('<HI', VERSION, len(weights))]
    for name, array in weights.items():
        array = np.ascontiguousarray(array, dtype='<f8')
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', array.ndim))
        chunks.append(struct.pack(f'<{array.ndim}I', *array.shape))
        chunks.append(array.tobytes())
    return b''.join(chunks)


def loads(payload: bytes) -> Dict[str, np.ndarray]:
    if payload[:len(MAGIC)] != MAGIC:
        raise OutputError("Not a weight snapshot (bad magic)")
    offset = len(MAGIC)
    try:
        version, count = struct.unpack_from('<HI', payload, offset)
        offset += struct.calcsize('<HI')
        if version != VERSION:
            raise OutputError(f"Unsupported snapshot version {version}")
        weights = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from('<H', payload, offset)
            offset += 2
            name = payload[offset:offset + name_len].decode('utf-8')
            offset += name_len
            (ndim,) = struct.unpack_from('<B', payload, offset)
            offset += 1
            shape = struct.unpack_from(f'<{ndim}I', payload, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(payload, dtype='<f8', count=size, offset=offset)
            offset += 8 * size
            weights[name] = data.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise OutputError(f"Truncated or corrupt snapshot: {exc}")
    return weights


def save(weights: Dict[str, np.ndarray], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(dumps(weights))
    except OSError as exc:
        raise OutputError(f"Could not write snapshot: {exc}", path)
    logger.info(f"Saved weight snapshot ({len(weights)} arrays) to {path}")
    return path


def load(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise OutputError(f"Could not read snapshot: {exc}", path)
    return loads(payload)
