"""
Named float64 arrays plus a JSON metadata header.

Binary layout::

  [8-byte little-endian header length][UTF-8 JSON header][<f8 payload]

The header lists every array with its shape and offset into the payload.
The same container stores samples, parsed skeletons, score sets and
checkpoints. A plain JSON rendition exists for hand inspection.

.. code:: python

  >>> import numpy as np
  >>> from lstcmda.codec import Container, decode, encode

  >>> original = Container({'kind': 'demo'}, {'w': np.arange(3.0)})
  >>> restored = decode(encode(original)).unwrap()
  >>> assert restored.meta == {'kind': 'demo'}
  >>> assert restored.arrays['w'].tolist() == [0.0, 1.0, 2.0]

"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping

import attr
import numpy as np
from returns.io import IOResult, impure_safe
from returns.result import Failure, Result, Success
from typing_extensions import Final, Literal, final

from lstcmda.primitives.exceptions import ValidationError

ContainerFormat = Literal['binary', 'json']

_LENGTH: Final = struct.Struct('<Q')
_FLOAT: Final = np.dtype('<f8')


@final
@attr.s(frozen=True, slots=True, auto_attribs=True, eq=False)
class Container(object):
    """Decoded metadata and arrays."""

    meta: Dict[str, Any]
    arrays: Dict[str, np.ndarray]


def encode(container: Container) -> bytes:
    """Serializes into the binary layout."""
    entries = []
    chunks = []
    offset = 0
    for name, array in container.arrays.items():
        values = np.ascontiguousarray(array, dtype=_FLOAT)
        entries.append({
            'name': name, 'shape': list(values.shape), 'offset': offset,
        })
        chunks.append(values.tobytes())
        offset += values.size
    header = json.dumps(
        {'meta': container.meta, 'tensors': entries}, sort_keys=True,
    ).encode('utf-8')
    return _LENGTH.pack(len(header)) + header + b''.join(chunks)


def decode(blob: bytes) -> Result[Container, ValidationError]:
    """Parses the binary layout, every size is checked."""
    if len(blob) < _LENGTH.size:
        return Failure(ValidationError('container is shorter than 8 bytes'))
    header_end = _LENGTH.size + _LENGTH.unpack_from(blob)[0]
    try:
        header = json.loads(blob[_LENGTH.size:header_end].decode('utf-8'))
    except ValueError as exc:
        return Failure(ValidationError('bad container header: {0}'.format(
            exc,
        )))

    if len(blob) < header_end or (len(blob) - header_end) % _FLOAT.itemsize:
        return Failure(ValidationError('payload is not a float64 array'))
    payload = np.frombuffer(blob[header_end:], dtype=_FLOAT)
    try:
        arrays = _unpack(header['tensors'], payload)
    except (KeyError, TypeError, ValueError) as exc:
        return Failure(ValidationError('bad tensor table: {0}'.format(exc)))
    return Success(Container(meta=header.get('meta', {}), arrays=arrays))


def encode_json(container: Container) -> str:
    """Serializes into a readable JSON document."""
    return json.dumps({
        'meta': container.meta,
        'tensors': {
            name: {
                'shape': list(np.shape(array)),
                'data': np.asarray(array, dtype=np.float64).ravel().tolist(),
            }
            for name, array in container.arrays.items()
        },
    }, sort_keys=True, indent=1)


def decode_json(text: str) -> Result[Container, ValidationError]:
    """Parses the JSON rendition."""
    try:
        document = json.loads(text)
        arrays = {
            name: np.asarray(entry['data'], dtype=np.float64).reshape(
                entry['shape'],
            )
            for name, entry in document['tensors'].items()
        }
    except (ValueError, KeyError, TypeError) as exc:
        return Failure(ValidationError('bad JSON container: {0}'.format(exc)))
    return Success(Container(meta=document.get('meta', {}), arrays=arrays))


@impure_safe
def write_container(
    path: Path,
    container: Container,
    fmt: ContainerFormat = 'binary',
) -> Path:
    """Writes a container, the parent directory must exist."""
    if fmt == 'json':
        path.write_text(encode_json(container), encoding='utf-8')
    else:
        path.write_bytes(encode(container))
    return path


def read_container(path: Path) -> IOResult[Container, Exception]:
    """Reads a container, ``.json`` files use the JSON rendition."""
    if path.suffix == '.json':
        return _read_text(path).bind_result(decode_json)
    return _read_bytes(path).bind_result(decode)


def as_container(
    meta: Mapping[str, Any],
    arrays: Mapping[str, Any],
) -> Container:
    """Builds a container from any mappings."""
    return Container(meta=dict(meta), arrays={
        name: np.asarray(array, dtype=np.float64)
        for name, array in arrays.items()
    })


@impure_safe
def _read_bytes(path: Path) -> bytes:
    return path.read_bytes()


@impure_safe
def _read_text(path: Path) -> str:
    return path.read_text(encoding='utf-8')


def _unpack(entries, payload: np.ndarray) -> Dict[str, np.ndarray]:
    arrays = {}
    for entry in entries:
        size = int(np.prod(entry['shape'], dtype=np.int64))
        start = int(entry['offset'])
        if start < 0 or start + size > payload.size:
            raise ValueError('{0!r} lies outside the payload'.format(
                entry['name'],
            ))
        arrays[str(entry['name'])] = payload[start:start + size].reshape(
            entry['shape'],
        ).astype(np.float64)
    return arrays
