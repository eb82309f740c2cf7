"""Correspondence JSON, model-point files (ASCII PLY / CSV) and pose JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, CorrespondenceSet, Pose, validate_intrinsics
from .errors import EmptyModel, InvalidPose, ParseError
from .metrics import ModelPoints

INTRINSIC_KEYS = ("fx", "fy", "cx", "cy", "width", "height")


def _number(value, field: str, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", path=path, field=field)
    if not math.isfinite(value):
        raise ParseError("number must be finite", path=path, field=field)
    return float(value)


def _vector(value, n: int, field: str, path) -> list[float]:
    if not isinstance(value, list) or len(value) != n:
        raise ParseError(f"expected an array of {n} numbers", path=path, field=field)
    return [_number(v, f"{field}[{i}]", path) for i, v in enumerate(value)]


def _intrinsics(obj, path) -> CameraIntrinsics:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", path=path, field="intrinsics")
    missing = [key for key in INTRINSIC_KEYS if key not in obj]
    if missing:
        raise ParseError(f"missing keys {missing}", path=path, field="intrinsics")
    for key in ("width", "height"):
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
            raise ParseError(f"expected an integer, got {v!r}", path=path, field=f"intrinsics.{key}")
    k = CameraIntrinsics(
        fx=_number(obj["fx"], "intrinsics.fx", path),
        fy=_number(obj["fy"], "intrinsics.fy", path),
        cx=_number(obj["cx"], "intrinsics.cx", path),
        cy=_number(obj["cy"], "intrinsics.cy", path),
        image_width=int(obj["width"]),
        image_height=int(obj["height"]),
    )
    return validate_intrinsics(k)


def _parse_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not UTF-8", path=path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc


def parse_correspondences(doc, path=None) -> tuple[CameraIntrinsics, CorrespondenceSet]:
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", path=path)
    if "intrinsics" not in doc:
        raise ParseError("missing key", path=path, field="intrinsics")
    if "correspondences" not in doc or not isinstance(doc["correspondences"], list):
        raise ParseError("expected an array", path=path, field="correspondences")
    k = _intrinsics(doc["intrinsics"], path)
    pixels, points, weights = [], [], []
    for i, item in enumerate(doc["correspondences"]):
        field = f"correspondences[{i}]"
        if not isinstance(item, dict):
            raise ParseError("expected an object", path=path, field=field)
        pixels.append(_vector(item.get("pixel"), 2, f"{field}.pixel", path))
        points.append(_vector(item.get("point"), 3, f"{field}.point", path))
        w = _number(item["geom_weight"], f"{field}.geom_weight", path) if "geom_weight" in item else 1.0
        if not 0.0 <= w <= 1.0:
            raise ParseError(f"geom_weight {w} outside [0, 1]", path=path, field=f"{field}.geom_weight")
        weights.append(w)
    c = CorrespondenceSet(
        np.array(pixels, dtype=np.float64).reshape(-1, 2),
        np.array(points, dtype=np.float64).reshape(-1, 3),
        np.array(weights, dtype=np.float64),
    )
    return k, c


def load_correspondences(path) -> tuple[CameraIntrinsics, CorrespondenceSet]:
    return parse_correspondences(_parse_json(path), path)


def load_truth(path) -> tuple[Pose, np.ndarray | None] | None:
    """Optional ``truth`` block written by :func:`save_correspondences`."""
    doc = _parse_json(path)
    truth = doc.get("truth") if isinstance(doc, dict) else None
    if truth is None:
        return None
    try:
        pose = pose_from_dict(truth)
    except (ParseError, InvalidPose) as exc:
        raise ParseError(str(exc), path=path, field="truth") from exc
    mask = truth.get("outlier_mask")
    if mask is not None:
        mask = np.array([bool(v) for v in mask])
    return pose, mask


def correspondences_to_dict(k: CameraIntrinsics, c: CorrespondenceSet) -> dict:
    return {
        "intrinsics": k.to_dict(),
        "correspondences": [
            {
                "pixel": [float(v) for v in c.pixels[i]],
                "point": [float(v) for v in c.points[i]],
                "geom_weight": float(c.geom_weights[i]),
            }
            for i in range(len(c))
        ],
    }


def save_correspondences(path, k: CameraIntrinsics, c: CorrespondenceSet, truth: Pose | None = None, outlier_mask=None) -> None:
    doc = correspondences_to_dict(k, c)
    if truth is not None:
        doc["truth"] = truth.to_dict()
        if outlier_mask is not None:
            doc["truth"]["outlier_mask"] = [bool(v) for v in outlier_mask]
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def pose_from_dict(obj) -> Pose:
    if not isinstance(obj, dict):
        raise ParseError("pose must be an object")
    R = _vector(obj.get("rotation"), 9, "rotation", None)
    t = _vector(obj.get("translation"), 3, "translation", None)
    return Pose(np.array(R).reshape(3, 3), np.array(t))


def pose_to_json(pose: Pose) -> str:
    return json.dumps(pose.to_dict())


def load_model_points(path) -> ModelPoints:
    """Vertices from an ASCII PLY (positions only are read) or an x,y,z CSV."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head.startswith(b"ply"):
        vertices = _read_ply(path)
    else:
        vertices = _read_csv(path)
    if len(vertices) == 0:
        raise EmptyModel(f"{path}: no vertices")
    return ModelPoints(vertices)


def _read_ply(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        text = None
    header_end = raw.find(b"end_header")
    if header_end < 0:
        raise ParseError("missing end_header", path=path)
    header = raw[:header_end].decode("ascii", errors="replace").splitlines()
    fmt = None
    n_vertex = None
    props: list[str] = []
    elements: list[tuple[str, int]] = []
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1] if len(parts) > 1 else None
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError("malformed element line", path=path, line=lineno)
            elements.append((parts[1], int(parts[2])))
            if parts[1] == "vertex":
                n_vertex = int(parts[2])
        elif parts[0] == "property" and elements and elements[-1][0] == "vertex":
            if parts[1] == "list":
                raise ParseError("list properties on vertices are not supported", path=path, line=lineno)
            props.append(parts[-1])
    if fmt != "ascii":
        raise ParseError(f"unsupported PLY format {fmt!r}; only ascii is read", path=path)
    if text is None:
        raise ParseError("non-ASCII bytes in an ascii PLY", path=path)
    if n_vertex is None:
        raise ParseError("no vertex element", path=path)
    try:
        cols = [props.index(a) for a in ("x", "y", "z")]
    except ValueError:
        raise ParseError("vertex element lacks x/y/z properties", path=path) from None
    # vertex data must be the first element in file order
    skip = 0
    for name, count in elements:
        if name == "vertex":
            break
        skip += count
    lines = text.splitlines()
    body_start = next(i for i, line in enumerate(lines) if line.strip() == "end_header") + 1
    rows = []
    data = lines[body_start + skip : body_start + skip + n_vertex]
    if len(data) < n_vertex:
        raise ParseError(f"expected {n_vertex} vertices, found {len(data)}", path=path)
    for offset, line in enumerate(data):
        parts = line.split()
        try:
            rows.append([float(parts[i]) for i in cols])
        except (ValueError, IndexError):
            raise ParseError("bad vertex row", path=path, line=body_start + skip + offset + 1) from None
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec) or rec[0].lstrip().startswith("#"):
                continue
            if len(rec) != 3:
                raise ParseError(f"expected 3 columns, got {len(rec)}", path=path, line=lineno)
            try:
                rows.append([float(f) for f in rec])
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header row
                raise ParseError("non-numeric value", path=path, line=lineno) from None
    return np.array(rows, dtype=np.float64).reshape(-1, 3)
