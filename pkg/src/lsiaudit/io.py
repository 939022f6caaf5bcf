"""Shape files, numeric serialization and atomic writes.

Curves are JSON (``points`` plus optional ``f`` and ``components``, or a
``surface`` model string and ``samples`` in surface coordinates).  Meshes
are Wavefront OBJ (``v``/``f`` records only) with the field in a one-column
CSV next to it.  Every float written is rounded to 12 significant digits so
that repeated runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .ambient import parse_model
from .errors import DomainError
from .submanifold import ClosedCurve, CurveOnSurface, TriMesh

__all__ = [
    "SIG_DIGITS",
    "fmt",
    "clean",
    "atomic_write",
    "write_json",
    "write_csv",
    "load_curve_json",
    "save_curve_json",
    "load_obj",
    "save_obj",
    "load_field_csv",
    "save_field_csv",
    "load_shape",
    "save_shape",
]

SIG_DIGITS = 12


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def clean(obj):
    """Recursively round floats and convert numpy containers for JSON."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(fmt(x))
    return obj


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the file the usual umask-derived mode
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, json.dumps(clean(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write(path, buf.getvalue())


# --- curves ----------------------------------------------------------------


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise DomainError(f"{path}: malformed JSON ({e})") from None


def load_curve_json(path):
    d = _read_json(path)
    if not isinstance(d, dict):
        raise DomainError(f"{path}: expected a JSON object")
    f = d.get("f")
    if "surface" in d:
        if "samples" not in d:
            raise DomainError(f"{path}: curve on a surface needs 'samples'")
        return CurveOnSurface(parse_model(d["surface"]), np.asarray(d["samples"], float), f)
    if "points" not in d:
        raise DomainError(f"{path}: curve JSON needs 'points'")
    if d.get("closed", True) is not True:
        raise DomainError(f"{path}: only closed curves are supported")
    return ClosedCurve(np.asarray(d["points"], float), f, d.get("components"))


def save_curve_json(path, curve):
    if isinstance(curve, CurveOnSurface):
        d = {"surface": _model_string(curve.surface), "samples": curve.uv, "f": curve.f}
    else:
        d = {"points": curve.points, "closed": True, "f": curve.f}
        if curve.n_components > 1:
            d["components"] = curve.labels
    write_json(path, d)


def _model_string(model):
    desc = model.describe()
    kind = desc.pop("kind")
    return kind + ":" + ",".join(f"{k}={fmt(v)}" for k, v in sorted(desc.items()))


# --- meshes ----------------------------------------------------------------


def load_obj(path):
    V, F = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    V.append([float(t) for t in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(t.split("/")[0]) for t in parts[1:]]
                    if len(idx) != 3:
                        raise DomainError(f"{path}:{lineno}: only triangles are supported")
                    F.append([i - 1 if i > 0 else len(V) + i for i in idx])
            except ValueError:
                raise DomainError(f"{path}:{lineno}: cannot parse {line.strip()!r}") from None
    if not V or not F:
        raise DomainError(f"{path}: no vertices or faces")
    return np.asarray(V, float), np.asarray(F, int)


def save_obj(path, mesh: TriMesh):
    lines = [f"v {fmt(x)} {fmt(y)} {fmt(z)}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    atomic_write(path, "\n".join(lines) + "\n")


def load_field_csv(path):
    """Per-vertex field: rows ``vertex_index, f`` or a single ``f`` column."""
    idx, vals = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            row = [c.strip() for c in row if c.strip()]
            if not row:
                continue
            try:
                nums = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DomainError(f"{path}:{lineno}: non-numeric row {row!r}") from None
            if len(nums) >= 2:
                idx.append(int(nums[0]))
            vals.append(nums[-1])
    vals = np.asarray(vals, float)
    if idx:
        if len(idx) != vals.size or sorted(idx) != list(range(vals.size)):
            raise DomainError(f"{path}: vertex indices must cover 0..{vals.size - 1} exactly once")
        out = np.empty_like(vals)
        out[np.asarray(idx)] = vals
        return out
    return vals


def save_field_csv(path, f):
    write_csv(path, ["vertex_index", "f"], [[i, float(v)] for i, v in enumerate(f)])


def _field_path(obj_path):
    return Path(obj_path).with_suffix(".csv")


def load_shape(path, field_path=None):
    path = Path(path)
    if path.suffix.lower() == ".obj":
        V, F = load_obj(path)
        fp = Path(field_path) if field_path else _field_path(path)
        f = load_field_csv(fp) if fp.exists() else None
        return TriMesh(V, F, f)
    if path.suffix.lower() == ".json":
        shape = load_curve_json(path)
        if field_path:
            shape = shape.with_field(load_field_csv(field_path))
        return shape
    raise DomainError(f"unknown shape file type {path.suffix!r}")


def save_shape(outdir, name, shape):
    outdir = Path(outdir)
    if isinstance(shape, TriMesh):
        save_obj(outdir / f"{name}.obj", shape)
        save_field_csv(outdir / f"{name}.csv", shape.f)
        return [outdir / f"{name}.obj", outdir / f"{name}.csv"]
    save_curve_json(outdir / f"{name}.json", shape)
    return [outdir / f"{name}.json"]
