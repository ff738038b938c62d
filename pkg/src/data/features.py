"""
Precomputed frame-feature files and their annotation tables.

Feature file (little-endian):
    magic 'URMF', u32 version, u32 segment count
    per segment: u16 id length, id bytes, u32 T, u32 N, u32 C_in,
                 T·N·C_in float32 values, row-major

Annotations sit beside the feature file with a `.csv` suffix, one segment
per line: `id,t_start_s,verb,noun,action`.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.data.segment import Segment
from src.utils.binary_io import BinaryReader, BinaryWriter
from src.utils.constants import DEFAULT_FPS, FEATURE_MAGIC, FEATURE_VERSION
from src.utils.errors import DimensionError, ParseError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]
Annotation = Tuple[float, int, int, int]


def annotations_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".csv")


def write_features(path: PathLike, segments: Sequence[Segment],
                   annotations: Optional[PathLike] = None) -> Path:
    """
    Write segments and their annotation table

    Args:
        path: Feature file to create
        segments: Segments to store, frames (T, N, C_in)
        annotations: Annotation table path; defaults to the `.csv` sibling

    Returns:
        Path: The feature file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        out = BinaryWriter(handle)
        out.raw(FEATURE_MAGIC)
        out.u32(FEATURE_VERSION)
        out.u32(len(segments))
        for segment in segments:
            out.text(segment.segment_id)
            T, N, C = segment.frames.shape
            for dim in (T, N, C):
                out.u32(dim)
            out.array(segment.frames, "<f4")
    write_annotations(annotations or annotations_path(path), segments)
    logger.info(f"Wrote {len(segments)} segments to {path}")
    return path


def write_annotations(path: PathLike, segments: Sequence[Segment]) -> None:
    lines = [f"{s.segment_id},{s.t_start_s!r},{s.verb},{s.noun},{s.action}" for s in segments]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_blobs(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Parse a feature file into frames by segment id

    Raises:
        ParseError: Bad magic, unknown version, truncated payload, duplicate ids or
            a vertex grid or feature width differing from the first segment, with
            the byte offset of the problem
    """
    path = Path(path)
    reader = BinaryReader(path.read_bytes(), str(path))
    reader.magic(FEATURE_MAGIC)
    version_at = reader.offset
    version = reader.u32("version")
    if version != FEATURE_VERSION:
        raise ParseError(f"{path}: unsupported feature file version {version}", version_at)
    count = reader.u32("segment count")
    blobs: Dict[str, np.ndarray] = {}
    grid: Optional[Tuple[int, ...]] = None
    for index in range(count):
        id_at = reader.offset
        segment_id = reader.text(reader.u16(f"segment {index} id length"), f"segment {index} id")
        if segment_id in blobs:
            raise ParseError(f"{path}: duplicate segment id '{segment_id}'", id_at)
        dims_at = reader.offset
        dims = tuple(reader.u32(f"segment '{segment_id}' dims") for _ in range(3))
        if grid is None:
            grid = dims[1:]
        elif dims[1:] != grid:
            raise ParseError(f"{path}: segment '{segment_id}' has (N, C_in) = {dims[1:]}, "
                             f"earlier segments have {grid}", dims_at)
        blobs[segment_id] = reader.array("<f4", dims, f"segment '{segment_id}' payload")
    if not reader.at_end():
        raise ParseError(f"{path}: {reader.remaining} trailing bytes after {count} segments",
                         reader.offset)
    return blobs


def read_annotations(path: PathLike) -> Dict[str, Annotation]:
    """Annotation rows by id; malformed lines raise ParseError with the line number"""
    path = Path(path)
    rows: Dict[str, Annotation] = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 5:
            raise ParseError(f"{path}: expected 5 fields, got {len(fields)}", number, unit="line")
        try:
            rows[fields[0]] = (float(fields[1]), int(fields[2]), int(fields[3]), int(fields[4]))
        except ValueError:
            raise ParseError(f"{path}: cannot parse '{line}'", number, unit="line") from None
    return rows


def load_features(path: PathLike, annotations: Optional[PathLike] = None,
                  fps: float = DEFAULT_FPS) -> List[Segment]:
    """
    Load segments with labels joined by id

    Args:
        path: Feature file
        annotations: Annotation table; defaults to the `.csv` sibling
        fps: Frame rate of the stored features

    Returns:
        List[Segment]: Segments in annotation order

    Raises:
        ParseError: Malformed files, or annotations naming ids with no features
    """
    blobs = read_feature_blobs(path)
    rows = read_annotations(annotations or annotations_path(path))
    orphans = [segment_id for segment_id in rows if segment_id not in blobs]
    if orphans:
        raise ParseError(f"annotations without feature blobs: {', '.join(orphans)}")
    unlabelled = len(blobs) - len(rows)
    if unlabelled:
        logger.warning(f"{unlabelled} feature blobs in {path} have no annotation and are ignored")
    segments = [
        Segment(segment_id, blobs[segment_id], t_start, verb, noun, action, fps)
        for segment_id, (t_start, verb, noun, action) in rows.items()
    ]
    logger.info(f"Loaded {len(segments)} segments from {path}")
    return segments


def check_dims(segments: Sequence[Segment], num_vertices: int, feature_dim: int) -> None:
    """Every segment must match the declared (N, C_in)"""
    for segment in segments:
        if segment.frames.shape[1:] != (num_vertices, feature_dim):
            raise DimensionError(f"segment {segment.segment_id} features",
                                 segment.frames.shape[1:], (num_vertices, feature_dim))
