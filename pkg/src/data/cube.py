"""
Hyperspectral cube ingestion for ADE-Net
Binary cube files, .mat research downloads and delimited pixel lists
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.io import loadmat

from src.errors import DataFormatError, MissingInputError, ValidationError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class HsiCube:
    """height x width x bands reflectances with a class map (0 = unlabeled)"""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValidationError(f"cube values must be height x width x bands, got shape {self.values.shape}")
        if self.labels.shape != self.values.shape[:2]:
            raise ValidationError(
                f"label map {self.labels.shape} does not match spatial size {self.values.shape[:2]}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("cube contains non-finite reflectances")
        present = np.unique(self.labels[self.labels > 0])
        if present.size == 0:
            raise ValidationError("cube has no labeled pixels")
        if not np.array_equal(present, np.arange(1, present.size + 1)):
            raise ValidationError(
                "labeled class ids must form a contiguous range 1..C",
                f"found {present.tolist()}",
            )

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max())


class CubeReader:
    """
    Reader/writer for the binary cube format.

    Layout (little-endian): magic "HSIC", u32 version, u32 height, u32 width,
    u32 bands, f32 raster band-interleaved-by-pixel, u16 label map.
    """

    MAGIC = b"HSIC"
    VERSION = 1
    HEADER = struct.Struct("<4sIIII")

    def save(self, cube: HsiCube, path: PathLike) -> Path:
        path = Path(path)
        with open(path, "wb") as f:
            f.write(self.HEADER.pack(self.MAGIC, self.VERSION, cube.height, cube.width, cube.bands))
            f.write(np.ascontiguousarray(cube.values, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(cube.labels, dtype="<u2").tobytes())
        logger.info(f"Wrote cube {path.name}: {cube.height}x{cube.width}x{cube.bands}")
        return path

    def load(self, path: PathLike) -> HsiCube:
        path = Path(path)
        if not path.exists():
            raise MissingInputError(f"cube file not found: {path}")
        raw = path.read_bytes()
        if len(raw) < self.HEADER.size:
            raise DataFormatError(f"{path.name}: truncated header")
        magic, version, height, width, bands = self.HEADER.unpack_from(raw)
        if magic != self.MAGIC:
            raise DataFormatError(f"{path.name}: bad magic {magic!r}")
        if version != self.VERSION:
            raise DataFormatError(f"{path.name}: unsupported cube version {version}")
        pixels = height * width
        raster_bytes = pixels * bands * 4
        expected = self.HEADER.size + raster_bytes + pixels * 2
        if len(raw) != expected:
            raise DataFormatError(f"{path.name}: expected {expected} bytes, found {len(raw)}", "truncated or padded")
        values = np.frombuffer(raw, dtype="<f4", count=pixels * bands, offset=self.HEADER.size)
        labels = np.frombuffer(raw, dtype="<u2", count=pixels, offset=self.HEADER.size + raster_bytes)
        cube = HsiCube(values.reshape(height, width, bands).copy(), labels.reshape(height, width).copy())
        logger.info(f"Loaded cube {path.name}: {height}x{width}x{bands}, {cube.num_classes} classes")
        return cube


def _first_array(contents: dict, key: Optional[str], ndim: int, source: str) -> np.ndarray:
    if key is not None:
        if key not in contents:
            raise DataFormatError(f"{source}: no variable '{key}'")
        return np.asarray(contents[key])
    candidates = [k for k in contents if not k.startswith("__") and np.ndim(contents[k]) == ndim]
    if not candidates:
        raise DataFormatError(f"{source}: no {ndim}-D variable found")
    return np.asarray(contents[candidates[0]])


def load_mat_cube(
    path: PathLike,
    key: Optional[str] = None,
    gt_path: Optional[PathLike] = None,
    gt_key: Optional[str] = None,
) -> HsiCube:
    """Read a MATLAB research download (e.g. Indian_pines_corrected.mat + Indian_pines_gt.mat)"""
    path = Path(path)
    for p in (path, gt_path):
        if p is not None and not Path(p).exists():
            raise MissingInputError(f"mat file not found: {p}")
    try:
        contents = loadmat(path)
        gt_contents = loadmat(gt_path) if gt_path is not None else contents
    except (ValueError, OSError, TypeError) as e:
        raise DataFormatError(f"{path.name}: unreadable .mat file", str(e))
    values = _first_array(contents, key, 3, path.name).astype(np.float32)
    labels = _first_array(gt_contents, gt_key, 2, Path(gt_path or path).name).astype(np.uint16)
    return HsiCube(values, labels)


def load_pixel_list(path: PathLike) -> HsiCube:
    """
    Read a comma-delimited pixel list with columns row, col, label, b0 .. b{B-1}.
    Pixels that are not listed are unlabeled zeros.
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"pixel list not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"{path.name}: unreadable pixel list", str(e))
    required = ["row", "col", "label"]
    missing = [c for c in required if c not in frame.columns]
    band_columns = [c for c in frame.columns if c not in required]
    if missing or not band_columns or frame.empty:
        raise DataFormatError(f"{path.name}: needs columns row,col,label and at least one band", f"missing {missing}")
    try:
        rows = frame["row"].to_numpy(dtype=np.int64)
        cols = frame["col"].to_numpy(dtype=np.int64)
        labels = frame["label"].to_numpy(dtype=np.int64)
        bands = frame[band_columns].to_numpy(dtype=np.float32)
    except ValueError as e:
        raise DataFormatError(f"{path.name}: non-numeric entries", str(e))
    if rows.min() < 0 or cols.min() < 0 or labels.min() < 0:
        raise ValidationError(f"{path.name}: negative row, column or label")
    if frame.duplicated(subset=["row", "col"]).any():
        raise ValidationError(f"{path.name}: duplicate pixel positions")
    height, width = int(rows.max()) + 1, int(cols.max()) + 1
    values = np.zeros((height, width, len(band_columns)), dtype=np.float32)
    label_map = np.zeros((height, width), dtype=np.uint16)
    values[rows, cols] = bands
    label_map[rows, cols] = labels
    return HsiCube(values, label_map)


def cube_pixels(cube: HsiCube) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Labeled pixels as (features, 0-based class labels, flat positions); label 0 is dropped"""
    flat_labels = cube.labels.reshape(-1)
    positions = np.flatnonzero(flat_labels > 0)
    features = cube.values.reshape(-1, cube.bands)[positions].astype(np.float64)
    return features, flat_labels[positions].astype(np.int64) - 1, positions


cube_reader = CubeReader()


def load_cube(path: PathLike) -> HsiCube:
    return cube_reader.load(path)


def save_cube(cube: HsiCube, path: PathLike) -> Path:
    return cube_reader.save(cube, path)
