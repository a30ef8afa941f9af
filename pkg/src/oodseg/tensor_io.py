"""Interchange tensor and mask I/O.

Tensors travel as NPY v1.0 containers restricted to little-endian float32,
C-order, rank 3. Masks travel as binary PGM (P5, maxval 255) with the label
convention 0 = in-distribution, 1 = OoD, 255 = ignore. Anything outside that
subset is a hard load error; the loader never reinterprets dtype or byte
order silently.
"""

from __future__ import annotations

import ast
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    IllegalLabelValue,
    IoFailure,
    MalformedHeader,
    MalformedPgm,
    MissingFile,
    NonFiniteValue,
    UnsupportedDtype,
)

_MAGIC = b"\x93NUMPY"
_DESCR = "<f4"

IGNORE_LABEL = 255
LEGAL_MASK_VALUES = frozenset({0, 1, 255})

# Per-sample file naming convention inside a dataset directory.
FEATURES_SUFFIX = ".features.npy"
LOGITS_SUFFIX = ".logits.npy"
GT_SUFFIX = ".gt.pgm"
SCORE_SUFFIX = ".score.npy"
MASK_SUFFIX = ".mask.pgm"


def _check_rank3_f32(data: np.ndarray, what: str) -> np.ndarray:
    data = np.asarray(data)
    if data.ndim != 3:
        raise MalformedHeader(f"{what}: expected rank 3, got rank {data.ndim}")
    if any(s < 1 for s in data.shape):
        raise MalformedHeader(f"{what}: zero-sized dimension in shape {data.shape}")
    data = np.ascontiguousarray(data, dtype=np.dtype(_DESCR))
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{what}: NaN or Inf in payload")
    return data


@dataclass
class FeatureMap:
    """D-dimensional feature vector per low-resolution pixel, shape [H', W', D]."""

    data: np.ndarray

    def __post_init__(self):
        self.data = _check_rank3_f32(self.data, "FeatureMap")

    @property
    def height_lr(self) -> int:
        return self.data.shape[0]

    @property
    def width_lr(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


@dataclass
class LogitMap:
    """C class logits per full-resolution pixel, shape [H, W, C] with C >= 2."""

    data: np.ndarray

    def __post_init__(self):
        self.data = _check_rank3_f32(self.data, "LogitMap")
        if self.classes < 2:
            raise MalformedHeader(f"LogitMap: needs >= 2 classes, got {self.classes}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]


@dataclass
class GroundTruthMask:
    """Per-pixel labels in {0 = ID, 1 = OoD, 255 = ignore}, shape [H, W]."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise MalformedPgm(f"mask: expected rank 2, got rank {labels.ndim}")
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        illegal = ~np.isin(labels, (0, 1, 255))
        if illegal.any():
            bad = int(labels[illegal].flat[0])
            raise IllegalLabelValue(f"mask: value {bad} outside {{0, 1, 255}}")
        self.labels = labels

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise MalformedHeader(f"truncated file while reading {what}")
    return buf


def load_tensor(path) -> np.ndarray:
    """Load one interchange tensor, returning the raw [H, W, C] float32 array.

    Accepts only NPY v1.0 with descr '<f4', C order, rank 3, and a fully
    finite payload. Everything else raises a typed error instead of being
    coerced.
    """
    path = Path(path)
    try:
        fh = open(path, "rb")
    except FileNotFoundError as exc:
        raise MissingFile(str(path)) from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    with fh:
        if _read_exact(fh, 6, "magic") != _MAGIC:
            raise MalformedHeader(f"{path}: not an NPY file")
        major, minor = _read_exact(fh, 2, "version")
        if (major, minor) != (1, 0):
            raise MalformedHeader(f"{path}: NPY version {major}.{minor}, only 1.0 accepted")
        (header_len,) = struct.unpack("<H", _read_exact(fh, 2, "header length"))
        header_bytes = _read_exact(fh, header_len, "header")
        try:
            header = ast.literal_eval(header_bytes.decode("latin1").strip())
        except (ValueError, SyntaxError) as exc:
            raise MalformedHeader(f"{path}: unparseable header") from exc
        if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
            raise MalformedHeader(f"{path}: unexpected header keys")
        if header["descr"] != _DESCR:
            raise UnsupportedDtype(f"{path}: descr {header['descr']!r}, only '<f4' accepted")
        if header["fortran_order"] is not False:
            raise MalformedHeader(f"{path}: Fortran order not accepted")
        shape = header["shape"]
        if (
            not isinstance(shape, tuple)
            or len(shape) != 3
            or not all(isinstance(s, int) and s >= 1 for s in shape)
        ):
            raise MalformedHeader(f"{path}: shape {shape!r} is not a rank-3 positive tuple")
        expected = shape[0] * shape[1] * shape[2] * 4
        payload = fh.read()
        if len(payload) != expected:
            raise MalformedHeader(
                f"{path}: payload is {len(payload)} bytes, header promises {expected}"
            )
    data = np.frombuffer(payload, dtype=np.dtype(_DESCR)).reshape(shape)
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: NaN or Inf in payload")
    return data.copy()  # decouple from the read buffer


def load_features(path) -> FeatureMap:
    return FeatureMap(load_tensor(path))


def load_logits(path) -> LogitMap:
    return LogitMap(load_tensor(path))


def save_tensor(tensor, path) -> None:
    """Write a tensor as NPY v1.0 '<f4' C-order; round-trips bit-exactly."""
    data = tensor.data if isinstance(tensor, (FeatureMap, LogitMap)) else tensor
    data = _check_rank3_f32(data, "save_tensor")
    header = (
        "{'descr': '<f4', 'fortran_order': False, 'shape': "
        + repr(tuple(int(s) for s in data.shape))
        + ", }"
    )
    # Pad so magic+version+len+header is a multiple of 64, newline-terminated.
    unpadded = len(_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(b"\x01\x00")
            fh.write(struct.pack("<H", len(header)))
            fh.write(header.encode("latin1"))
            fh.write(data.tobytes("C"))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def _next_pgm_token(buf: bytes, pos: int):
    # Skip whitespace and '#' comments, then collect one token.
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in b" \t\r\n":
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise MalformedPgm("truncated PGM header")
    return buf[start:pos], pos


def load_mask(path) -> GroundTruthMask:
    """Load a binary PGM (P5, maxval 255) mask with values in {0, 1, 255}."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError as exc:
        raise MissingFile(str(path)) from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    try:
        magic, pos = _next_pgm_token(buf, 0)
        if magic != b"P5":
            raise MalformedPgm(f"{path}: magic {magic!r}, expected b'P5'")
        wtok, pos = _next_pgm_token(buf, pos)
        htok, pos = _next_pgm_token(buf, pos)
        mtok, pos = _next_pgm_token(buf, pos)
        width, height, maxval = int(wtok), int(htok), int(mtok)
    except ValueError as exc:
        raise MalformedPgm(f"{path}: non-numeric header field") from exc
    if maxval != 255:
        raise MalformedPgm(f"{path}: maxval {maxval}, expected 255")
    if width < 1 or height < 1:
        raise MalformedPgm(f"{path}: degenerate dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte separates header and raster
    raster = buf[pos : pos + width * height]
    if len(raster) != width * height:
        raise MalformedPgm(f"{path}: raster shorter than {width}x{height}")
    labels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GroundTruthMask(labels.copy())


def save_mask(mask, path) -> None:
    """Write a {0, 1, 255} mask as binary PGM; round-trips bit-exactly."""
    if not isinstance(mask, GroundTruthMask):
        mask = GroundTruthMask(np.asarray(mask))
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(mask.labels.tobytes("C"))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
