"""
Model checkpoint files for ADE-Net
Header (magic, version, descriptor) followed by little-endian float64 parameter blobs
"""
import json
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.errors import DataFormatError, MissingInputError
from src.nn.models import ModelHandle, build_model

logger = logging.getLogger(__name__)

MAGIC = b"ADEN"
VERSION = 1
_HEADER = struct.Struct("<4sII")


def save_checkpoint(model: ModelHandle, path: Union[str, Path]) -> Path:
    path = Path(path)
    descriptor = json.dumps(model.descriptor, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(descriptor)))
        f.write(descriptor)
        for param in model.parameters():
            f.write(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
    logger.info(f"Saved checkpoint {path.name} ({model.parameter_count} parameters)")
    return path


def load_checkpoint(path: Union[str, Path]) -> ModelHandle:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path.name}: truncated checkpoint header")
    magic, version, desc_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataFormatError(f"{path.name}: bad magic {magic!r}")
    if version != VERSION:
        raise DataFormatError(f"{path.name}: unsupported checkpoint version {version}")
    offset = _HEADER.size + desc_len
    if len(raw) < offset:
        raise DataFormatError(f"{path.name}: truncated descriptor")
    try:
        descriptor = json.loads(raw[_HEADER.size:offset].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path.name}: unreadable descriptor", str(e))

    model = build_model(descriptor)
    arrays = []
    for name, param in model.named_parameters():
        nbytes = param.size * 8
        if len(raw) < offset + nbytes:
            raise DataFormatError(f"{path.name}: truncated at parameter {name}")
        arrays.append(np.frombuffer(raw, dtype="<f8", count=param.size, offset=offset).reshape(param.shape))
        offset += nbytes
    if offset != len(raw):
        raise DataFormatError(f"{path.name}: {len(raw) - offset} trailing bytes")
    model.load_state(arrays)
    return model
