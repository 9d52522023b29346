"""
Readers and writers of the text formats used by the command line: xyz / ASCII ply point
clouds, key=value run configs and JSON-lines manifests.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from loguru import logger

from . import exceptions
from .enums import CloudFormats
from .. import types

PRECISION = ".9g"


def _format_row(row: np.ndarray) -> str:
    return " ".join(format(float(v), PRECISION) for v in row)


def _parse_row(fields: list[str], path: str, line: int) -> list[float]:
    try:
        row = [float(v) for v in fields]
    except ValueError:
        raise exceptions.CloudFormatError(path, line, f"cannot parse {' '.join(fields)!r} as numbers") from None
    if not np.isfinite(row).all():
        raise exceptions.CloudFormatError(path, line, "non-finite coordinate")
    return row


def parse_xyz(text: str, path: str = "<string>") -> types.PointCloud:
    """
    Parses ``x y z`` lines. Blank lines and lines starting with ``#`` are skipped.
    """
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 3:
            raise exceptions.CloudFormatError(path, number, f"expected 3 values, found {len(fields)}")
        rows.append(_parse_row(fields, path, number))
    if not rows:
        raise exceptions.CloudFormatError(path, None, "no points")
    return types.PointCloud(np.array(rows), Path(path).name)


def format_xyz(cloud: types.PointCloud) -> str:
    return "".join(_format_row(row) + "\n" for row in cloud.points)


def parse_ply(text: str, path: str = "<string>") -> types.PointCloud:
    """
    Parses an ASCII ply file holding a vertex element with (at least) x, y, z properties.
    """
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise exceptions.CloudFormatError(path, 1, "missing 'ply' magic")
    count = None
    properties: list[str] = []
    in_vertex = False
    body_start = None
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if not fields or fields[0] == "comment" or fields[0] == "obj_info":
            continue
        if fields[0] == "format":
            if len(fields) < 2 or fields[1] != "ascii":
                raise exceptions.CloudFormatError(path, number, "only ASCII ply is supported")
        elif fields[0] == "element":
            if len(fields) != 3 or not fields[2].isdigit():
                raise exceptions.CloudFormatError(path, number, "malformed element line")
            in_vertex = fields[1] == "vertex"
            if in_vertex:
                count = int(fields[2])
            elif int(fields[2]) != 0:
                raise exceptions.CloudFormatError(path, number, f"unsupported element '{fields[1]}'")
        elif fields[0] == "property":
            if in_vertex:
                properties.append(fields[-1])
        elif fields[0] == "end_header":
            body_start = number
            break
        else:
            raise exceptions.CloudFormatError(path, number, f"unexpected header line {line.strip()!r}")
    if body_start is None:
        raise exceptions.CloudFormatError(path, None, "missing end_header")
    if count is None or count < 1:
        raise exceptions.CloudFormatError(path, None, "no vertex element")
    try:
        columns = [properties.index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise exceptions.CloudFormatError(path, None, "vertex element lacks x, y, z properties") from None
    rows = []
    for number, line in enumerate(lines[body_start:], start=body_start + 1):
        fields = line.split()
        if not fields:
            continue
        if len(rows) == count:
            raise exceptions.CloudFormatError(path, number, "more vertices than declared")
        if len(fields) != len(properties):
            raise exceptions.CloudFormatError(path, number, f"expected {len(properties)} values")
        values = _parse_row(fields, path, number)
        rows.append([values[c] for c in columns])
    if len(rows) != count:
        raise exceptions.CloudFormatError(path, None, f"declared {count} vertices, found {len(rows)}")
    return types.PointCloud(np.array(rows), Path(path).name)


def format_ply(cloud: types.PointCloud) -> str:
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
              "property float x", "property float y", "property float z", "end_header"]
    return "\n".join(header) + "\n" + format_xyz(cloud)


def read_cloud(path: str | Path) -> types.PointCloud:
    """
    Reads a cloud file; the format follows the suffix (``.ply`` or anything else as xyz).

    :raises CloudFormatError: when the file is missing or malformed.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise exceptions.CloudFormatError(str(path), None, e.strerror or "cannot read file") from None
    except UnicodeDecodeError as e:
        raise exceptions.CloudFormatError(str(path), None, f"not utf-8 text at byte {e.start}") from None
    fmt = CloudFormats.from_path(str(path))
    cloud = parse_ply(text, str(path)) if fmt == CloudFormats.PLY else parse_xyz(text, str(path))
    logger.debug(f"Read {len(cloud)} points from {path}.")
    return cloud


def write_cloud(path: str | Path, cloud: types.PointCloud | np.ndarray):
    path = Path(path)
    if not isinstance(cloud, types.PointCloud):
        cloud = types.PointCloud(cloud)
    fmt = CloudFormats.from_path(str(path))
    path.write_text(format_ply(cloud) if fmt == CloudFormats.PLY else format_xyz(cloud), encoding="utf-8")


def parse_key_values(text: str, path: str = "<string>") -> dict[str, str]:
    """
    Parses ``key = value`` lines. ``#`` starts a comment; blank lines are skipped.

    :raises ConfigError: on lines without ``=`` and on repeated keys.
    """
    values: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        key = key.strip()
        if not sep or not key:
            raise exceptions.ConfigError(key or f"{path}:{number}", "expected 'key = value'")
        if key in values:
            raise exceptions.ConfigError(key, f"repeated at {path}:{number}")
        values[key] = value.strip()
    return values


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]):
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    records = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                logger.error(f"Malformed record at {path}:{number}.")
                logger.debug("TRACEBACK", exc_info=True)
                raise
    return records
