"""Reading reference geometry and writing surfaces, Gauss images and logs."""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .diffgeo import unit_normal
from .reference import ReferenceCloud
from .sampling import make_grid
from .surface import ControlGrid, SurfaceModel, precompute_rows

FMT = "%.17g"


class FormatError(ValueError):
    pass


def _floats(tokens, path, lineno):
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected numbers, got {' '.join(tokens)!r}") from None
    if not all(math.isfinite(x) for x in values):
        raise FormatError(f"{path}:{lineno}: non-finite coordinate")
    return values


def _obj_index(token, count):
    i = int(token)
    return i - 1 if i > 0 else count + i


def read_obj(path):
    """Vertices, vertex normals and faces ``[(vertex ids, normal ids or None)]``."""
    verts, norms, faces = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            tag, rest = parts[0], parts[1:]
            if tag == "v":
                verts.append(_floats(rest[:3], path, lineno))
            elif tag == "vn":
                norms.append(_floats(rest[:3], path, lineno))
            elif tag == "f":
                vids, nids = [], []
                for tok in rest:
                    fields = tok.split("/")
                    vids.append(_obj_index(fields[0], len(verts)))
                    if len(fields) == 3 and fields[2]:
                        nids.append(_obj_index(fields[2], len(norms)))
                if len(vids) < 3:
                    raise FormatError(f"{path}:{lineno}: face with fewer than 3 vertices")
                faces.append((vids, nids if len(nids) == len(vids) else None))
    return np.array(verts, float).reshape(-1, 3), np.array(norms, float).reshape(-1, 3), faces


def vertex_normals(verts, faces):
    """Area-weighted average of face normals at each vertex."""
    acc = np.zeros_like(verts)
    for vids, _ in faces:
        p = verts[vids]
        # fan cross products sum to twice the area times the unit normal
        n = np.cross(p[1:-1] - p[0], p[2:] - p[0]).sum(axis=0)
        acc[vids] += n
    return acc


def load_reference(path):
    """Reference cloud from an OBJ mesh or an ``x y z nx ny nz`` text file."""
    path = Path(path)
    if path.suffix.lower() == ".obj":
        verts, norms, faces = read_obj(path)
        if len(verts) == 0:
            raise FormatError(f"{path}: no vertices")
        normals = None
        if len(norms) and any(nids is not None for _, nids in faces):
            normals = np.zeros_like(verts)
            for vids, nids in faces:
                if nids is not None:
                    unit = norms[nids] / np.linalg.norm(norms[nids], axis=1, keepdims=True)
                    np.add.at(normals, vids, unit)
        elif len(norms) == len(verts):
            normals = norms
        elif faces:
            normals = vertex_normals(verts, faces)
        if normals is None:
            raise FormatError(f"{path}: mesh has neither faces nor per-vertex normals")
        if np.any(np.linalg.norm(normals, axis=1) == 0):
            raise FormatError(f"{path}: some vertices have no usable normal")
        return ReferenceCloud(verts, normals, str(path))
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split("#", 1)[0].replace(",", " ").split()
            if not parts:
                continue
            if len(parts) < 6:
                raise FormatError(f"{path}:{lineno}: expected x y z nx ny nz")
            rows.append(_floats(parts[:6], path, lineno))
    if not rows:
        raise FormatError(f"{path}: no points")
    data = np.array(rows)
    return ReferenceCloud(data[:, :3], data[:, 3:], str(path))


def _fmt(values):
    return " ".join(FMT % x for x in values)


def tessellate(model, tessellation=(20, 20), points=None):
    """Row-major grid positions and exactly normalized normals."""
    nu, nv = tessellation
    if nu < 2 or nv < 2:
        raise ValueError("tessellation must be at least 2x2")
    grid = make_grid(nu, nv)
    q = precompute_rows(model, grid.params, quantities=("value", "u", "v")).evaluate(
        model.flat_points() if points is None else points)
    return grid.params, q[0], unit_normal(q[1], q[2])


def export_surface(model, path, tessellation=(20, 20)):
    """Quad OBJ of the surface plus ``<stem>_control.obj`` and ``<stem>.json``.

    Returns the written paths.
    """
    path = Path(path)
    nu, nv = tessellation
    _, pos, nrm = tessellate(model, tessellation)
    lines = ["# bicubic surface tessellation %d x %d" % (nu, nv)]
    lines += ["v " + _fmt(p) for p in pos]
    lines += ["vn " + _fmt(n) for n in nrm]
    for i in range(nu - 1):
        for j in range(nv - 1):
            a = i * nv + j + 1
            ids = (a, a + nv, a + nv + 1, a + 1)
            lines.append("f " + " ".join(f"{k}//{k}" for k in ids))
    path.write_text("\n".join(lines) + "\n")

    cn, cm = model.control.shape
    net = ["# control net %d x %d" % (cn, cm)]
    net += ["v " + _fmt(p) for p in model.flat_points()]
    for i in range(cn):
        net.append("l " + " ".join(str(i * cm + j + 1) for j in range(cm)))
    for j in range(cm):
        net.append("l " + " ".join(str(i * cm + j + 1) for i in range(cn)))
    control_path = path.with_name(path.stem + "_control.obj")
    control_path.write_text("\n".join(net) + "\n")
    json_path = path.with_suffix(".json")
    save_surface(model, json_path)
    return path, control_path, json_path


def save_surface(model, path):
    data = {
        "kind": model.kind,
        "knots_u": model.knots_u.tolist(),
        "knots_v": model.knots_v.tolist(),
        "control_points": model.points.tolist(),
        "weights": None if model.weights is None else model.weights.tolist(),
        "panel_shape": None if model.panel_shape is None else list(model.panel_shape),
    }
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def load_surface(path):
    """Surface written by :func:`save_surface` (control points, knots, weights)."""
    try:
        data = json.loads(Path(path).read_text())
        arrays = [np.array(data[k], dtype=float) for k in ("control_points", "knots_u", "knots_v")]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a surface file ({exc})") from None
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise FormatError(f"{path}: non-finite control point or knot")
    shape = data.get("panel_shape")
    return SurfaceModel(ControlGrid(np.array(data["control_points"], dtype=float)),
                        np.array(data["knots_u"], float), np.array(data["knots_v"], float),
                        data["kind"], None if data.get("weights") is None
                        else np.array(data["weights"], float),
                        None if shape is None else tuple(shape))


def export_gauss_image(image, xyz_path, csv_path):
    """Unit normals as XYZ text and one CSV row per patch plane."""
    Path(xyz_path).write_text("".join(_fmt(n) + "\n" for n in image.normals))
    with open(csv_path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["patch_id", "v_x", "v_y", "v_z", "d", "max_distance"])
        for j, ((v, d), dist) in enumerate(zip(image.planes, image.patch_distance)):
            out.writerow([j] + [FMT % x for x in (*v, d, dist)])


HISTORY_HEADER = ["iter", "E_total", "E_d", "E_r", "E_c", "E_f", "step_norm", "seconds"]


def write_history(history, path, timing=False):
    """Iteration log as CSV; ``seconds`` is 0 unless ``timing`` so reruns are byte-identical."""
    if not history:
        raise ValueError("empty history")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(HISTORY_HEADER)
        for rec in history:
            seconds = rec.wall_time if timing else 0.0
            out.writerow([rec.iteration] + [FMT % x for x in (
                rec.E_total, rec.E_d, rec.E_r, rec.E_c, rec.E_f, rec.step_norm)]
                + ["%.6f" % seconds])


def read_history(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "iter" else float(v)) for k, v in row.items()} for row in rows]


PANEL_HEADER = ["panel", "spec", "v_x", "v_y", "v_z", "d", "axis_x", "axis_y", "axis_z",
                "point_x", "point_y", "point_z", "max_plane_distance", "max_coplanarity",
                "max_abs_K"]


def write_panel_report(report, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(PANEL_HEADER)
        for r in report:
            nums = (*r.v, r.d, *r.axis_direction, *r.axis_point, r.max_plane_distance,
                    r.max_coplanarity, r.max_abs_K)
            out.writerow([r.panel, r.spec] + [FMT % x for x in nums])


def write_curvature(cmap, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["u", "v", "K"])
        for (u, v), k in zip(cmap.params, cmap.K):
            out.writerow([FMT % u, FMT % v, FMT % k])


def write_rulings(rulings, path):
    cols = ["patch", "p_x", "p_y", "p_z", "q_x", "q_y", "q_z", "rt_x", "rt_y", "rt_z",
            "ro_x", "ro_y", "ro_z", "inflection"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(cols)
        for r in rulings:
            out.writerow([r.patch] + [FMT % x for x in (*r.p, *r.q, *r.r_t, *r.r_o)]
                         + [int(r.inflection)])
