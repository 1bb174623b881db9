"""File codecs: JSON for structured data, OBJ for meshes, CSV for tables.

Every encode/decode pair round-trips exactly (floats survive via repr), and
encoding is deterministic (sorted keys) so identical inputs produce
byte-identical files.
"""

import csv
import json

import numpy as np

from .body import BodyModel, Camera, PoseParams
from .contact import (ContactSignature, ContactState, ImageSupport,
                      segmentation_from_signature)
from .errors import CodecError
from .evaluation import EvalRecord
from .inference_filter import FilterConfig, RawPrediction
from .regions import CoarsenMap, RegionMap

_STATE_NAMES = {ContactState.CONTACT: "contact", ContactState.MASKED: "masked",
                ContactState.NO_CONTACT: "no-contact"}
_STATE_VALUES = {v: k for k, v in _STATE_NAMES.items()}


def _dump(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write("\n")


def _load(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise CodecError(f"invalid JSON: {e}", path=path) from e
    except OSError as e:
        raise CodecError(str(e), path=path) from e


def _require(data, field, path, kind=None):
    if field not in data:
        raise CodecError("missing", path=path, field=field)
    val = data[field]
    if kind is not None and not isinstance(val, kind):
        raise CodecError(f"expected {kind.__name__}", path=path, field=field)
    return val


# -- body model ---------------------------------------------------------

def save_body_model(model, path):
    weights = [[int(v), int(j), float(w)]
               for v, j in zip(*np.nonzero(model.skinning_weights))
               for w in [model.skinning_weights[v, j]]]
    regressor = [[int(j), int(v), float(w)]
                 for j, v in zip(*np.nonzero(model.joint_regressor))
                 for w in [model.joint_regressor[j, v]]]
    _dump({
        "vertices": model.template_vertices.tolist(),
        "faces": model.faces.tolist(),
        "joints": [{"parent": int(p), "offset": o.tolist()}
                   for p, o in zip(model.joint_parents, model.joint_offsets)],
        "weights": weights,
        "regressor": regressor,
    }, path)


def load_body_model(path):
    data = _load(path)
    verts = np.asarray(_require(data, "vertices", path, list), dtype=float)
    faces = np.asarray(_require(data, "faces", path, list), dtype=int)
    joints = _require(data, "joints", path, list)
    parents = np.array([_require(j, "parent", path) for j in joints], dtype=int)
    offsets = np.array([_require(j, "offset", path) for j in joints], dtype=float)
    weights = np.zeros((len(verts), len(joints)))
    for v, j, w in _require(data, "weights", path, list):
        weights[int(v), int(j)] = float(w)
    regressor = np.zeros((len(joints), len(verts)))
    for j, v, w in _require(data, "regressor", path, list):
        regressor[int(j), int(v)] = float(w)
    try:
        return BodyModel(verts, faces, parents, offsets, weights, regressor)
    except Exception as e:
        raise CodecError(f"invalid body model: {e}", path=path) from e


# -- pose parameters ----------------------------------------------------

def save_pose_params(params, path):
    _dump({"joint_rotations": params.joint_rotations.tolist(),
           "translation": params.translation.tolist(),
           "shape": params.shape.tolist()}, path)


def load_pose_params(path):
    data = _load(path)
    try:
        return PoseParams(np.asarray(_require(data, "joint_rotations", path, list)),
                          np.asarray(_require(data, "translation", path, list)),
                          np.asarray(_require(data, "shape", path, list)))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid pose params: {e}", path=path) from e


# -- camera -------------------------------------------------------------

def save_camera(camera, path):
    _dump({"fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
           "rotation": camera.rotation.tolist(),
           "translation": camera.translation.tolist()}, path)


def load_camera(path):
    data = _load(path)
    try:
        return Camera(fx=float(_require(data, "fx", path)),
                      fy=float(_require(data, "fy", path)),
                      cx=float(_require(data, "cx", path)),
                      cy=float(_require(data, "cy", path)),
                      rotation=np.asarray(_require(data, "rotation", path, list)),
                      translation=np.asarray(_require(data, "translation", path, list)))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid camera: {e}", path=path) from e


# -- regions ------------------------------------------------------------

def save_region_map(region_map, path):
    _dump({"granularity": region_map.granularity,
           "facet_to_region": region_map.facet_to_region.tolist()}, path)


def load_region_map(path):
    data = _load(path)
    try:
        return RegionMap(int(_require(data, "granularity", path)),
                         np.asarray(_require(data, "facet_to_region", path, list)))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid region map: {e}", path=path) from e


def save_coarsen_map(cmap, path):
    _dump({"fine": cmap.fine, "coarse": cmap.coarse,
           "map": cmap.mapping.tolist()}, path)


def load_coarsen_map(path):
    data = _load(path)
    try:
        return CoarsenMap(int(_require(data, "fine", path)),
                          int(_require(data, "coarse", path)),
                          np.asarray(_require(data, "map", path, list)))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid coarsen map: {e}", path=path) from e


# -- annotation (signature + image support) -----------------------------

def save_annotation(signature, support, path):
    pairs = [{"r1": r1, "r2": r2, "state": "contact"}
             for r1, r2 in signature.contact_pairs()]
    pairs += [{"r1": r1, "r2": r2, "state": "masked"}
              for r1, r2 in signature.masked_pairs()]
    supp = [{"r": r, "x": support.points[r][0], "y": support.points[r][1]}
            for r in support.regions()] if support is not None else []
    _dump({"granularity": signature.granularity, "pairs": pairs,
           "support": supp}, path)


def load_annotation(path):
    """Returns (ContactSignature, ImageSupport).

    Accepts an optional masked_regions list: all pairs touching those
    regions become masked (unless annotated contact).
    """
    data = _load(path)
    n = int(_require(data, "granularity", path))
    entries = []
    for row in _require(data, "pairs", path, list):
        state = _require(row, "state", path)
        if state not in _STATE_VALUES:
            raise CodecError(f"unknown state {state!r}", path=path, field="pairs")
        entries.append(((int(_require(row, "r1", path)),
                         int(_require(row, "r2", path))), _STATE_VALUES[state]))
    for r in data.get("masked_regions", []):
        r = int(r)
        if not 0 <= r < n:
            raise CodecError(f"region {r} out of range", path=path,
                             field="masked_regions")
        annotated = {p for p, _ in entries}
        for other in range(n):
            if other != r and (min(r, other), max(r, other)) not in annotated:
                entries.append(((r, other), ContactState.MASKED))
    try:
        sig = ContactSignature(n, entries)
        support = ImageSupport(n, {int(row["r"]): (row["x"], row["y"])
                                   for row in data.get("support", [])})
    except Exception as e:
        raise CodecError(f"invalid annotation: {e}", path=path) from e
    seg = segmentation_from_signature(sig)
    for r in support.regions():
        if seg.states[r] != ContactState.CONTACT:
            raise CodecError(f"support on non-contact region {r}", path=path,
                             field="support")
    return sig, support


# -- raw predictions and filter config ----------------------------------

def save_prediction(pred, path):
    probs = [{"r1": r1, "r2": r2, "p": p}
             for (r1, r2), p in sorted(pred.signature_probs.items())]
    landmarks = [None if not np.isfinite(lm).all() else [float(lm[0]), float(lm[1])]
                 for lm in pred.landmarks]
    _dump({"granularity": pred.granularity,
           "signature_probs": probs,
           "segmentation_probs": pred.segmentation_probs.tolist(),
           "landmarks": landmarks}, path)


def load_prediction(path):
    data = _load(path)
    n = int(_require(data, "granularity", path))
    probs = {}
    for row in _require(data, "signature_probs", path, list):
        probs[(int(_require(row, "r1", path)), int(_require(row, "r2", path)))] = \
            float(_require(row, "p", path))
    landmarks = [[np.nan, np.nan] if lm is None else lm
                 for lm in _require(data, "landmarks", path, list)]
    try:
        return RawPrediction(n, probs,
                             np.asarray(_require(data, "segmentation_probs", path, list)),
                             np.asarray(landmarks, dtype=float))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid prediction: {e}", path=path) from e


def save_filter_config(cfg, path):
    _dump({"tau_s": cfg.tau_s, "tau_c": cfg.tau_c, "tau_dist": cfg.tau_dist}, path)


def load_filter_config(path):
    data = _load(path)
    try:
        return FilterConfig(tau_s=float(_require(data, "tau_s", path)),
                            tau_c=float(_require(data, "tau_c", path)),
                            tau_dist=float(_require(data, "tau_dist", path)))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid filter config: {e}", path=path) from e


# -- keypoints ----------------------------------------------------------

def save_keypoints(keypoints, keypoint_joints, path):
    _dump({"keypoints": [{"joint": int(j), "x": float(x), "y": float(y)}
                         for j, (x, y) in zip(keypoint_joints, keypoints)]}, path)


def load_keypoints(path):
    data = _load(path)
    rows = _require(data, "keypoints", path, list)
    joints = np.array([int(_require(r, "joint", path)) for r in rows], dtype=int)
    pts = np.array([[float(_require(r, "x", path)), float(_require(r, "y", path))]
                    for r in rows], dtype=float).reshape(-1, 2)
    return pts, joints


# -- evaluation records --------------------------------------------------

def save_eval_record(record, path):
    _dump({"id": record.instance_id, "class": record.scenario_class,
           "P": record.pose_error, "T": record.translation_error,
           "V": record.vertex_error, "C": record.contact_distance}, path)


def load_eval_record(path):
    data = _load(path)
    try:
        return EvalRecord(str(_require(data, "id", path)),
                          str(_require(data, "class", path)),
                          float(_require(data, "P", path)),
                          float(_require(data, "T", path)),
                          float(_require(data, "V", path)),
                          None if data.get("C") is None else float(data["C"]))
    except CodecError:
        raise
    except Exception as e:
        raise CodecError(f"invalid eval record: {e}", path=path) from e


# -- reconstruction config (key = value lines) --------------------------

def save_config(config, path):
    with open(path, "w") as f:
        for key in sorted(config):
            f.write(f"{key} = {config[key]}\n")


def load_config(path):
    out = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise CodecError(str(e), path=path) from e
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CodecError(f"line {lineno} is not 'key = value'", path=path)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if raw.lower() in ("true", "false"):
            out[key] = raw.lower() == "true"
            continue
        try:
            out[key] = int(raw)
        except ValueError:
            try:
                out[key] = float(raw)
            except ValueError:
                out[key] = raw
    return out


# -- OBJ ----------------------------------------------------------------

def save_obj(verts, faces, path):
    """Vertices + triangular faces, y-up, meters, 1-based indices."""
    with open(path, "w") as f:
        for v in np.asarray(verts, dtype=float):
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for a, b, c in np.asarray(faces, dtype=int):
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_obj(path):
    verts = []
    faces = []
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        raise CodecError(str(e), path=path) from e
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0] not in ("v", "f"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise CodecError(f"line {lineno}: short vertex", path=path)
            verts.append([float(x) for x in parts[1:4]])
        else:
            if len(parts) != 4:
                raise CodecError(f"line {lineno}: only triangles supported", path=path)
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.asarray(verts, dtype=float), np.asarray(faces, dtype=int)


# -- CSV tables ----------------------------------------------------------

def save_trace_csv(trace, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "L_S", "L_psr", "L_col", "L_D", "L_N", "total"])
        for i, row in enumerate(trace):
            writer.writerow([i] + [repr(float(x)) for x in
                                   (row.l_s, row.l_psr, row.l_col,
                                    row.l_d, row.l_n, row.total)])


def save_metrics_csv(table, path):
    """Table-style CSV: one column per scenario class plus overall,
    one row per metric."""
    classes = [c for c in ("standing", "sitting-no-chair", "with-chair", "overall")
               if c in table]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric"] + classes)
        for metric in ("P", "T", "V", "C"):
            row = [metric]
            for c in classes:
                val = table[c].get(metric)
                row.append("" if val is None else repr(float(val)))
            writer.writerow(row)


def save_stats_csv(stats, path, pairs_path=None):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["region", "count"])
        for r, count in enumerate(stats.region_counts):
            writer.writerow([r, int(count)])
    if pairs_path is not None:
        with open(pairs_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["r1", "r2", "count"])
            for (r1, r2), count in sorted(stats.pair_counts.items()):
                writer.writerow([r1, r2, int(count)])
