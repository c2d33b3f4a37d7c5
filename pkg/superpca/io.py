from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.io import loadmat

from superpca.classify import LabelMap
from superpca.cube import HsiCube
from superpca.errors import FormatError, PaletteError, ParseError

__pdoc__ = {
    'superpca.io.PALETTE': 'RGB color of every class id; 0 is unlabeled (black)',
}

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

HSIF_DTYPE = 'f32'
HSIF_INTERLEAVE = 'bsq'
HSIF_BYTEORDER = 'le'
_payload_dtype = np.dtype('<f4')

PALETTE = (
    (0, 0, 0),
    (255, 0, 0),
    (0, 255, 0),
    (0, 0, 255),
    (255, 255, 0),
    (0, 255, 255),
    (255, 0, 255),
    (192, 192, 192),
    (128, 128, 128),
    (128, 0, 0),
    (128, 128, 0),
    (0, 128, 0),
    (128, 0, 128),
    (0, 128, 128),
    (0, 0, 128),
    (255, 165, 0),
    (139, 69, 19),
)


def write_hsif(cube: HsiCube, path: PathLike) -> None:
    """
    Write a cube as HSIF: one JSON header line, then little-endian float32 values band by band.
    """
    header = {'rows': cube.rows, 'cols': cube.cols, 'bands': cube.bands,
              'dtype': HSIF_DTYPE, 'interleave': HSIF_INTERLEAVE, 'byteorder': HSIF_BYTEORDER}
    with open(path, 'wb') as handle:
        handle.write(json.dumps(header).encode('utf-8') + b'\n')
        handle.write(cube.data.astype(_payload_dtype).tobytes())
    logger.info('wrote %s (%dx%dx%d)', path, cube.rows, cube.cols, cube.bands)


def _header_field(header: dict, key: str, offset: int):
    if key not in header:
        raise FormatError(f"HSIF header lacks {key!r} (byte offset {offset})")
    return header[key]


def _parse_hsif_header(raw: bytes):
    end = raw.find(b'\n')
    if end < 0:
        raise FormatError(f"HSIF header is not terminated by a newline (byte offset {len(raw)})")
    try:
        header = json.loads(raw[:end].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        position = getattr(err, 'pos', getattr(err, 'start', 0))
        raise FormatError(f"HSIF header is not valid JSON at byte offset {position}: {err}")
    if not isinstance(header, dict):
        raise FormatError('HSIF header must be a JSON object (byte offset 0)')
    dims = []
    for key in ('rows', 'cols', 'bands'):
        value = _header_field(header, key, 0)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise FormatError(f"HSIF header field {key!r} must be a positive integer, got {value!r} (byte offset 0)")
        dims.append(value)
    expected = {'dtype': HSIF_DTYPE, 'interleave': HSIF_INTERLEAVE, 'byteorder': HSIF_BYTEORDER}
    for key, supported in expected.items():
        value = _header_field(header, key, 0)
        if value != supported:
            raise FormatError(f"unsupported HSIF {key} {value!r}; only {supported!r} is supported (byte offset 0)")
    return dims, end + 1


def read_hsif(path: PathLike) -> HsiCube:
    """
    Read an HSIF file written by write_hsif.

    The header is validated before the payload is touched; a short or overlong payload raises
    FormatError naming the byte offset where the data stops matching the header.
    """
    raw = Path(path).read_bytes()
    (rows, cols, bands), header_end = _parse_hsif_header(raw)
    expected = 4 * rows * cols * bands
    actual = len(raw) - header_end
    if actual < expected:
        raise FormatError(f"HSIF payload truncated at byte offset {header_end + actual}: "
                          f"expected {expected} payload bytes, found {actual}")
    if actual > expected:
        raise FormatError(f"HSIF payload has {actual - expected} trailing bytes from byte offset "
                          f"{header_end + expected}")
    values = np.frombuffer(raw, dtype=_payload_dtype, count=rows * cols * bands, offset=header_end)
    return HsiCube(values.reshape(bands, rows, cols))


def write_labels(label_map: LabelMap, path: PathLike) -> None:
    """Write a LabelFile: "rows cols" then one line of space-separated ids per row."""
    lines = [f"{label_map.rows} {label_map.cols}"]
    lines.extend(' '.join(str(value) for value in row) for row in label_map.labels.tolist())
    Path(path).write_text('\n'.join(lines) + '\n')
    logger.info('wrote %s (%dx%d labels)', path, label_map.rows, label_map.cols)


def _parse_int(token: str, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"line {line}: {token!r} is not an integer")
    if value < 0:
        raise ParseError(f"line {line}: label {value} is negative")
    return value


def read_labels(path: PathLike) -> LabelMap:
    """
    Read a LabelFile.

    Raises
    ------
    ParseError
        naming the 1-based line of the first bad token, short row or missing row
    """
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError('line 1: missing "rows cols" header')
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError(f"line 1: expected \"rows cols\", got {lines[0]!r}")
    rows, cols = (_parse_int(token, 1) for token in head)
    if rows < 1 or cols < 1:
        raise ParseError(f"line 1: grid size must be positive, got {rows}x{cols}")
    grid = np.zeros((rows, cols), dtype=np.int64)
    for row in range(rows):
        number = row + 2
        if number > len(lines):
            raise ParseError(f"line {number}: missing row {row + 1} of {rows}")
        tokens = lines[row + 1].split()
        if len(tokens) != cols:
            raise ParseError(f"line {number}: expected {cols} values, found {len(tokens)}")
        grid[row] = [_parse_int(token, number) for token in tokens]
    for number, extra in enumerate(lines[rows + 1:], start=rows + 2):
        if extra.strip():
            raise ParseError(f"line {number}: unexpected data after {rows} rows")
    return LabelMap(grid)


def render_map(label_map: LabelMap, path: Optional[PathLike] = None) -> bytes:
    """
    Render a label map as a binary PPM (P6); class k gets PALETTE[k].

    Returns the file bytes and writes them to ``path`` when given.
    """
    labels = label_map.labels
    top = int(labels.max()) if labels.size else 0
    if top >= len(PALETTE):
        raise PaletteError(f"palette covers class ids up to {len(PALETTE) - 1}, map uses {top}")
    colors = np.asarray(PALETTE, dtype=np.uint8)[labels]
    image = f"P6\n{label_map.cols} {label_map.rows}\n255\n".encode('ascii') + colors.tobytes()
    if path is not None:
        Path(path).write_bytes(image)
        logger.info('wrote %s', path)
    return image


def _read_text_export(path: Path) -> np.ndarray:
    with open(path) as handle:
        head = handle.readline().split()
        if len(head) != 3:
            raise ParseError(f"line 1: expected \"rows cols bands\", got {' '.join(head)!r}")
        rows, cols, bands = (_parse_int(token, 1) for token in head)
        try:
            values = np.loadtxt(handle, dtype=np.float64, ndmin=2)
        except ValueError as err:
            raise ParseError(f"{path}: {err}")
    if values.shape != (rows * cols, bands):
        raise ParseError(f"{path}: expected {rows * cols} pixel lines of {bands} values, got shape {values.shape}")
    return values.reshape(rows, cols, bands)


def load_array(path: PathLike, key: Optional[str] = None) -> np.ndarray:
    """
    Load a scene array from .npy, .mat or a plain-text export.

    Cubes come back as (rows, cols, bands) and ground truths as (rows, cols). For .mat files
    ``key`` picks the variable; by default the first 3-D array, else the first 2-D one.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == '.npy':
        return np.load(path)
    if suffix == '.mat':
        content = {name: value for name, value in loadmat(path).items() if not name.startswith('__')}
        if key is not None:
            if key not in content:
                raise FormatError(f"{path} has no variable {key!r}; found {', '.join(sorted(content))}")
            return np.asarray(content[key])
        for ndim in (3, 2):
            for value in content.values():
                if isinstance(value, np.ndarray) and value.ndim == ndim:
                    return value
        raise FormatError(f"{path} holds no 2-D or 3-D array")
    if suffix in ('.txt', '.csv', '.dat'):
        return _read_text_export(path)
    raise FormatError(f"unsupported input {path}; use .npy, .mat or a .txt export")


def format_table(frame: pd.DataFrame) -> str:
    """Human-readable rendering of a result table, four decimals."""
    return frame.to_string(index=False, float_format=lambda value: f"{value:.4f}")


def write_table_csv(frame: pd.DataFrame, path: PathLike) -> None:
    frame.to_csv(path, index=False, float_format='%.6f')
    logger.info('wrote %s', path)
