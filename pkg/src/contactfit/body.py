"""Articulated skinned triangle mesh: forward kinematics, facet geometry, camera.

All positions are meters, y-up. A body model is immutable after
construction; posing is a pure function of (model, params).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError, ProjectionError
from .rotations import rodrigues, rodrigues_jacobian

_WEIGHT_TOL = 1e-6
_DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class BodyModel:
    """Template mesh + skeleton + skinning weights + joint regressor.

    template_vertices: (V, 3) float
    faces:             (F, 3) int vertex indices
    joint_parents:     (J,) int, -1 for the single root
    joint_offsets:     (J, 3) rest offset relative to the parent joint
    skinning_weights:  (V, J) float, rows non-negative and summing to 1
    joint_regressor:   (J, V) float, joints = regressor @ posed vertices
    """

    template_vertices: np.ndarray
    faces: np.ndarray
    joint_parents: np.ndarray
    joint_offsets: np.ndarray
    skinning_weights: np.ndarray
    joint_regressor: np.ndarray
    _topo: np.ndarray = field(init=False, repr=False, compare=False)
    _rest_joints: np.ndarray = field(init=False, repr=False, compare=False)
    _nz_verts: list = field(init=False, repr=False, compare=False)
    _nz_weights: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.template_vertices, dtype=float)
        f = np.asarray(self.faces, dtype=int)
        parents = np.asarray(self.joint_parents, dtype=int)
        offsets = np.asarray(self.joint_offsets, dtype=float)
        w = np.asarray(self.skinning_weights, dtype=float)
        reg = np.asarray(self.joint_regressor, dtype=float)
        for name, val in (("template_vertices", v), ("faces", f),
                          ("joint_offsets", offsets), ("skinning_weights", w),
                          ("joint_regressor", reg)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "joint_parents", parents)

        if v.ndim != 2 or v.shape[1] != 3:
            raise ParameterError("template_vertices must be (V, 3)")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
            raise ParameterError("faces must be (F, 3) with F >= 1")
        if f.min() < 0 or f.max() >= len(v):
            raise ParameterError("face references an invalid vertex index")
        J = len(parents)
        if offsets.shape != (J, 3):
            raise ParameterError("joint_offsets must be (J, 3)")
        if w.shape != (len(v), J):
            raise ParameterError("skinning_weights must be (V, J)")
        if reg.shape != (J, len(v)):
            raise ParameterError("joint_regressor must be (J, V)")
        if w.min() < -_WEIGHT_TOL:
            raise ParameterError("skinning weights must be non-negative")
        sums = w.sum(axis=1)
        if np.abs(sums - 1.0).max() > _WEIGHT_TOL:
            raise ParameterError("skinning weights must sum to 1 per vertex")

        roots = np.flatnonzero(parents < 0)
        if len(roots) != 1:
            raise ParameterError("joint tree must have exactly one root")
        topo = _topological_order(parents)
        object.__setattr__(self, "_topo", topo)

        rest = np.zeros((J, 3))
        for j in topo:
            p = parents[j]
            rest[j] = offsets[j] if p < 0 else rest[p] + offsets[j]
        object.__setattr__(self, "_rest_joints", rest)

        degenerate = _degenerate_faces(v, f)
        if degenerate.size:
            raise GeometryError(
                f"degenerate (zero-area) faces at load time: {degenerate[:8].tolist()}")

        # per-joint nonzero skinning rows, for sparse pose/jacobian loops
        nz = [np.flatnonzero(w[:, j]) for j in range(J)]
        object.__setattr__(self, "_nz_verts", nz)
        object.__setattr__(self, "_nz_weights", [w[idx, j] for j, idx in enumerate(nz)])

    @property
    def num_vertices(self):
        return len(self.template_vertices)

    @property
    def num_joints(self):
        return len(self.joint_parents)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def rest_joint_positions(self):
        """(J, 3) joint centers of the unscaled template."""
        return self._rest_joints.copy()

    @property
    def num_params(self):
        """Length of the packed parameter vector: 3 per joint + translation + shape."""
        return 3 * self.num_joints + 6


def _topological_order(parents):
    J = len(parents)
    order = []
    state = np.zeros(J, dtype=int)  # 0 unvisited, 1 on stack, 2 done
    for start in range(J):
        chain = []
        j = start
        while j >= 0 and state[j] == 0:
            state[j] = 1
            chain.append(j)
            j = parents[j]
        if j >= 0 and state[j] == 1:
            raise ParameterError("joint tree contains a cycle")
        for node in reversed(chain):
            state[node] = 2
            order.append(node)
    return np.array(order, dtype=int)


def _degenerate_faces(verts, faces):
    a = verts[faces[:, 0]]
    cross = np.cross(verts[faces[:, 1]] - a, verts[faces[:, 2]] - a)
    area2 = np.linalg.norm(cross, axis=1)
    return np.flatnonzero(area2 < _DEGENERATE_AREA)


@dataclass
class PoseParams:
    """Optimization variable: per-joint axis-angle rotations, global
    translation and per-axis shape scaling coefficients (0 = template)."""

    joint_rotations: np.ndarray  # (J, 3)
    translation: np.ndarray     # (3,)
    shape: np.ndarray           # (3,)

    def __post_init__(self):
        self.joint_rotations = np.array(self.joint_rotations, dtype=float)
        self.translation = np.array(self.translation, dtype=float)
        self.shape = np.array(self.shape, dtype=float)
        if self.joint_rotations.ndim != 2 or self.joint_rotations.shape[1] != 3:
            raise ParameterError("joint_rotations must be (J, 3)")
        if self.translation.shape != (3,) or self.shape.shape != (3,):
            raise ParameterError("translation and shape must be 3-vectors")
        if not (np.isfinite(self.joint_rotations).all()
                and np.isfinite(self.translation).all()
                and np.isfinite(self.shape).all()):
            raise ParameterError("pose parameters must be finite")

    @classmethod
    def identity(cls, num_joints):
        return cls(np.zeros((num_joints, 3)), np.zeros(3), np.zeros(3))

    def copy(self):
        return PoseParams(self.joint_rotations.copy(),
                          self.translation.copy(), self.shape.copy())

    def to_vector(self):
        return np.concatenate([self.joint_rotations.ravel(),
                               self.translation, self.shape])

    @classmethod
    def from_vector(cls, vec, num_joints):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3 * num_joints + 6,):
            raise ParameterError("parameter vector has the wrong length")
        return cls(vec[:3 * num_joints].reshape(num_joints, 3),
                   vec[3 * num_joints:3 * num_joints + 3],
                   vec[3 * num_joints + 3:])


def _check_dims(model, params):
    if params.joint_rotations.shape[0] != model.num_joints:
        raise ParameterError(
            f"params have {params.joint_rotations.shape[0]} joints, "
            f"model has {model.num_joints}")


def _forward_kinematics(model, params):
    """Global joint rotations G (J,3,3) and positions p (J,3), plus the
    shape-scaled template and rest joints."""
    scale = 1.0 + params.shape
    v_scaled = model.template_vertices * scale
    rest = model._rest_joints * scale
    parents = model.joint_parents
    J = model.num_joints
    R = np.empty((J, 3, 3))
    for j in range(J):
        R[j] = rodrigues(params.joint_rotations[j])
    G = np.empty((J, 3, 3))
    p = np.empty((J, 3))
    for j in model._topo:
        par = parents[j]
        if par < 0:
            G[j] = R[j]
            p[j] = rest[j] + params.translation
        else:
            G[j] = G[par] @ R[j]
            p[j] = p[par] + G[par] @ (rest[j] - rest[par])
    return v_scaled, rest, R, G, p


def joint_transforms(model, params):
    """Global joint rotations (J, 3, 3) and posed joint centers (J, 3)
    from forward kinematics (before the regressor)."""
    _check_dims(model, params)
    _, _, _, G, p = _forward_kinematics(model, params)
    return G, p


def pose_mesh(model, params):
    """Pose the template with LBS. Returns posed vertices (V, 3)."""
    _check_dims(model, params)
    v_scaled, rest, _, G, p = _forward_kinematics(model, params)
    out = np.zeros_like(v_scaled)
    for j in range(model.num_joints):
        idx = model._nz_verts[j]
        if len(idx) == 0:
            continue
        w = model._nz_weights[j]
        out[idx] += w[:, None] * ((v_scaled[idx] - rest[j]) @ G[j].T + p[j])
    return out


def pose_mesh_with_jacobian(model, params):
    """Posed vertices plus the Jacobian (V, 3, P) w.r.t. the packed
    parameter vector [rotations, translation, shape]."""
    _check_dims(model, params)
    v_scaled, rest, R, G, p = _forward_kinematics(model, params)
    parents = model.joint_parents
    topo = model._topo
    J = model.num_joints
    V = model.num_vertices
    P = model.num_params

    verts = np.zeros((V, 3))
    local = []  # per joint: weighted template offsets in the joint frame
    for j in range(J):
        idx = model._nz_verts[j]
        w = model._nz_weights[j]
        local.append(v_scaled[idx] - rest[j])
        if len(idx):
            verts[idx] += w[:, None] * (local[j] @ G[j].T + p[j])

    jac = np.zeros((V, 3, P))

    # rotation parameters: propagate dG/dp down the subtree of each joint
    dR_all = [rodrigues_jacobian(params.joint_rotations[j]) for j in range(J)]
    for m in range(J):
        for k in range(3):
            col = 3 * m + k
            dG = {}
            dp = {}
            for j in topo:
                par = parents[j]
                if j == m:
                    dRmk = dR_all[m][k]
                    dG[j] = dRmk if par < 0 else G[par] @ dRmk
                    dp[j] = np.zeros(3)
                elif par in dG:
                    dG[j] = dG[par] @ R[j]
                    dp[j] = dp[par] + dG[par] @ (rest[j] - rest[par])
            for j, dGj in dG.items():
                idx = model._nz_verts[j]
                if len(idx):
                    w = model._nz_weights[j]
                    jac[idx, :, col] += w[:, None] * (local[j] @ dGj.T + dp[j])

    # translation: all joints inherit it and weights sum to 1
    for k in range(3):
        jac[:, k, 3 * J + k] = 1.0

    # shape: template and rest joints scale per axis
    rest_unscaled = model._rest_joints
    for k in range(3):
        col = 3 * J + 3 + k
        drest = np.zeros((J, 3))
        drest[:, k] = rest_unscaled[:, k]
        dp = np.empty((J, 3))
        for j in topo:
            par = parents[j]
            if par < 0:
                dp[j] = drest[j]
            else:
                dp[j] = dp[par] + G[par] @ (drest[j] - drest[par])
        for j in range(J):
            idx = model._nz_verts[j]
            if len(idx) == 0:
                continue
            w = model._nz_weights[j]
            dv = np.zeros((len(idx), 3))
            dv[:, k] = model.template_vertices[idx, k]
            jac[idx, :, col] += w[:, None] * ((dv - drest[j]) @ G[j].T + dp[j])

    return verts, jac


def joint_positions(model, params):
    """Posed joint centers: regressor applied to the posed vertices."""
    return model.joint_regressor @ pose_mesh(model, params)


def joint_positions_with_jacobian(model, params):
    verts, jac = pose_mesh_with_jacobian(model, params)
    joints = model.joint_regressor @ verts
    jjac = np.tensordot(model.joint_regressor, jac, axes=(1, 0))  # (J, 3, P)
    return joints, jjac


@dataclass(frozen=True)
class Facet:
    center: np.ndarray
    normal: np.ndarray


class FacetGeometry:
    """Per-facet centers and unit normals of a posed mesh.

    Indexing returns a single Facet; .centers / .normals are (F, 3) arrays.
    """

    def __init__(self, centers, normals):
        self.centers = centers
        self.normals = normals

    def __len__(self):
        return len(self.centers)

    def __getitem__(self, i):
        return Facet(self.centers[i], self.normals[i])


def facet_geometry(verts, faces):
    """Centers (mean of corners) and unit normals (winding order) per facet.

    Raises GeometryError listing offending faces when any face is degenerate.
    """
    verts = np.asarray(verts, dtype=float)
    faces = np.asarray(faces, dtype=int)
    if faces.min(initial=0) < 0 or faces.max(initial=-1) >= len(verts):
        raise ParameterError("face references an invalid vertex index")
    a = verts[faces[:, 0]]
    b = verts[faces[:, 1]]
    c = verts[faces[:, 2]]
    centers = (a + b + c) / 3.0
    cross = np.cross(b - a, c - a)
    norms = np.linalg.norm(cross, axis=1)
    bad = np.flatnonzero(norms < _DEGENERATE_AREA)
    if bad.size:
        raise GeometryError(f"degenerate faces (zero normal): {bad[:8].tolist()}")
    return FacetGeometry(centers, cross / norms[:, None])


def facet_normal_vertex_jacobian(verts, faces, face_ids):
    """d(normal)/d(corner vertices) for the selected faces.

    Returns (len(face_ids), 3, 3, 3): [f, corner, normal_component, vertex_component].
    """
    verts = np.asarray(verts, dtype=float)
    out = np.empty((len(face_ids), 3, 3, 3))
    for row, fid in enumerate(face_ids):
        ia, ib, ic = faces[fid]
        a, b, c = verts[ia], verts[ib], verts[ic]
        u = b - a
        v = c - a
        m = np.cross(u, v)
        mn = np.linalg.norm(m)
        if mn < _DEGENERATE_AREA:
            raise GeometryError(f"degenerate face {fid} in normal jacobian")
        n = m / mn
        proj = (np.eye(3) - np.outer(n, n)) / mn
        sk_u = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
        sk_v = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        out[row, 0] = proj @ (sk_v - sk_u)
        out[row, 1] = proj @ (-sk_v)
        out[row, 2] = proj @ sk_u
    return out


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: x_cam = rotation @ x_world + translation, then
    perspective division onto the (fx, fy, cx, cy) intrinsics."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float))
        if self.fx <= 0 or self.fy <= 0:
            raise ParameterError("focal lengths must be positive")
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ParameterError("camera extrinsics must be (3,3) rotation and 3-vector")

    def transform(self, points):
        """World points (N, 3) or (3,) to camera coordinates."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


def project(camera, points):
    """Project world points to pixel coordinates.

    Accepts a single (3,) point or an (N, 3) batch; raises ProjectionError
    when any point has non-positive depth.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    cam = camera.transform(pts.reshape(-1, 3))
    z = cam[:, 2]
    if (z <= 0.0).any():
        raise ProjectionError("point behind camera (non-positive depth)")
    uv = np.empty((len(cam), 2))
    uv[:, 0] = camera.fx * cam[:, 0] / z + camera.cx
    uv[:, 1] = camera.fy * cam[:, 1] / z + camera.cy
    return uv[0] if single else uv
