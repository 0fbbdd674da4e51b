"""
Checkpoint files.

Layout (little-endian): b"SRPC", u32 version=1, u32 header length, UTF-8 JSON
header (config echo, step, random-stream state), then the payload region:
u32 entry count and per entry (u32 name length, name, u32 rank, u32 extents,
float32 values), followed by a u32 CRC32 of the payload region.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from src.nets.config import StudentConfig
from src.nets.layers import ParameterSet
from src.nets.projector import ProjectionHead
from src.nets.student import StudentNetwork
from src.nets.teacher import TeacherEncoder
from src.pipeline.errors import CheckpointFormatError, ConfigError
from src.pipeline.utils import ensure_dir
from src.training.config import TrainConfig

logger = logging.getLogger(__name__)

MAGIC = b"SRPC"
VERSION = 1
GROUPS = ("student", "head", "ema", "adam_m", "adam_v")

_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    config: TrainConfig
    step: int
    student: ParameterSet
    head: ParameterSet
    ema: ParameterSet
    adam_m: ParameterSet = field(default_factory=dict)   # keys "student/<name>" and "head/<name>"
    adam_v: ParameterSet = field(default_factory=dict)
    rng_state: Dict[str, Any] = field(default_factory=dict)
    format_version: int = VERSION

    def groups(self) -> List[Tuple[str, ParameterSet]]:
        return [(name, getattr(self, name)) for name in GROUPS]


def _header_bytes(ckpt: Checkpoint) -> bytes:
    header = {
        "format_version": ckpt.format_version,
        "config": ckpt.config.to_dict(),
        "step": ckpt.step,
        "rng": ckpt.rng_state,
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _payload_bytes(ckpt: Checkpoint) -> bytes:
    chunks: List[bytes] = []
    count = 0
    for group, params in ckpt.groups():
        for name, value in params.items():
            encoded = f"{group}/{name}".encode("utf-8")
            arr = np.ascontiguousarray(value, dtype="<f4")
            chunks.append(_U32.pack(len(encoded)) + encoded)
            chunks.append(_U32.pack(arr.ndim) + b"".join(_U32.pack(d) for d in arr.shape))
            chunks.append(arr.tobytes())
            count += 1
    return _U32.pack(count) + b"".join(chunks)


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    header = _header_bytes(ckpt)
    payload = _payload_bytes(ckpt)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return MAGIC + _U32.pack(VERSION) + _U32.pack(len(header)) + header + payload + _U32.pack(crc)


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    path.write_bytes(checkpoint_bytes(ckpt))
    logger.info("Saved checkpoint at step %d to %s", ckpt.step, path)
    return path


class _Reader:
    def __init__(self, blob: bytes, path: Path) -> None:
        self.blob = blob
        self.path = path
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.blob):
            raise CheckpointFormatError(f"{self.path}: truncated while reading {what} at offset {self.offset}")
        chunk = self.blob[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Raises:
        CheckpointFormatError: On bad magic, version, CRC or truncated data
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version} at offset 4")
    header_len = reader.u32("header length")
    try:
        header = json.loads(reader.take(header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointFormatError(f"{path}: unreadable header at offset 12: {err}") from err

    payload_start = reader.offset
    if len(reader.blob) - payload_start < 4:
        raise CheckpointFormatError(f"{path}: missing CRC at offset {payload_start}")
    payload = reader.blob[payload_start:-4]
    stored_crc = _U32.unpack(reader.blob[-4:])[0]
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise CheckpointFormatError(f"{path}: CRC mismatch over payload at offset {payload_start}")

    groups: Dict[str, ParameterSet] = {name: {} for name in GROUPS}
    reader = _Reader(payload, path)
    for _ in range(reader.u32("entry count")):
        full_name = reader.take(reader.u32("name length"), "entry name").decode("utf-8")
        shape = tuple(reader.u32("extent") for _ in range(reader.u32("rank")))
        size = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(reader.take(4 * size, f"values of {full_name}"), dtype="<f4")
        group, _, name = full_name.partition("/")
        if group not in groups:
            raise CheckpointFormatError(f"{path}: unknown entry group '{group}' for {full_name}")
        groups[group][name] = values.reshape(shape).astype(np.float32)

    try:
        config = TrainConfig.from_dict(header["config"])
    except (KeyError, ConfigError) as err:
        raise CheckpointFormatError(f"{path}: invalid config echo: {err}") from err
    return Checkpoint(
        config=config,
        step=int(header["step"]),
        rng_state=header.get("rng", {}),
        format_version=int(header["format_version"]),
        **groups,
    )


def models_from_checkpoint(
    ckpt: Checkpoint, use_ema: bool = True
) -> Tuple[StudentNetwork, ProjectionHead, TeacherEncoder]:
    """Student (EMA weights by default), projection head and teacher of a checkpoint."""
    model_cfg: StudentConfig = ckpt.config.model
    student = StudentNetwork(model_cfg, dict(ckpt.ema if use_ema else ckpt.student))
    head = ProjectionHead(model_cfg.d_model, model_cfg.d_teacher, dict(ckpt.head))
    return student, head, TeacherEncoder.from_config(model_cfg)
