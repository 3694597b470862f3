"""Pinhole projection and pose recovery from point correspondences.

The tracker knows the 3D positions of identified flashers and their
pixel locations in the current frame; recovering the camera pose is a
perspective-n-point problem. With six or more points a direct linear
transform gives a good starting pose; with four or five the DLT is
underdetermined, so a fixed fan of rotation seeds is refined and the
best reprojection wins. Refinement is Gauss-Newton over a 6-vector
increment, three rotation components applied through the exponential
map on the left and three translation components, which sidesteps
gimbal issues without quaternion bookkeeping. Coplanar point sets make
the problem ambiguous and are rejected up front.

Pixels are (row, col) everywhere: col = fx * x / z + cx and
row = fy * y / z + cy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COPLANARITY_RTOL = 1e-9
GRADIENT_TOL = 1e-12
MAX_ITERATIONS = 200

ORTHONORMALITY_TOL = 1e-10


class DegenerateConfigurationError(ValueError):
    """Point set is coplanar; pose recovery would be ambiguous."""


class InsufficientDataError(ValueError):
    """Fewer correspondences than the minimum of four."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_size: tuple[int, int] | None = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if np.abs(r @ r.T - np.eye(3)).max() > ORTHONORMALITY_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError("rotation determinant is not +1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def exp_so3(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for an axis-angle 3-vector (Rodrigues)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    k = np.array(
        [[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]], dtype=float
    )
    if theta < 1e-12:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def _nearest_rotation(m: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def project(K: CameraIntrinsics, pose: Pose, point) -> tuple[float, float]:
    """Pinhole projection of one world point; raises behind the camera."""
    x, y, z = pose.transform(np.asarray(point, dtype=float).reshape(1, 3))[0]
    if z <= 0:
        raise ValueError(f"point has nonpositive depth {z}")
    return (K.fy * y / z + K.cy, K.fx * x / z + K.cx)


def is_coplanar(points) -> bool:
    """True when the centered point matrix is rank-deficient.

    Deficiency means the smallest singular value is below 1e-9 of the
    largest, which also catches collinear and coincident sets.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise ValueError("coplanarity needs at least 4 points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return bool(sv[-1] < COPLANARITY_RTOL * sv[0])


def reprojection_residuals(K, pose, points, pixels) -> np.ndarray:
    """Stacked (row, col) reprojection errors in pixels."""
    cam = pose.transform(points)
    z = cam[:, 2]
    rows = K.fy * cam[:, 1] / z + K.cy
    cols = K.fx * cam[:, 0] / z + K.cx
    res = np.stack([rows - pixels[:, 0], cols - pixels[:, 1]], axis=1)
    return res.ravel()


def reprojection_jacobian(K, pose, points) -> np.ndarray:
    """Jacobian of the residuals over (rotation increment, translation).

    The increment acts in camera frame: Xc' = exp(w) Xc + dt, so
    dXc/dw = -[Xc]x and dXc/dt = I.
    """
    cam = pose.transform(points)
    m = len(cam)
    jac = np.zeros((2 * m, 6))
    for i, (x, y, z) in enumerate(cam):
        d_row = np.array([0.0, K.fy / z, -K.fy * y / (z * z)])
        d_col = np.array([K.fx / z, 0.0, -K.fx * x / (z * z)])
        skew = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=float)
        dxc = np.hstack([-skew, np.eye(3)])
        jac[2 * i] = d_row @ dxc
        jac[2 * i + 1] = d_col @ dxc
    return jac


def _refine(K, pose, points, pixels) -> tuple[Pose, float]:
    """Gauss-Newton with Levenberg fallback; returns pose and final cost."""
    lam = 0.0
    cost = float(np.sum(reprojection_residuals(K, pose, points, pixels) ** 2))
    for _ in range(MAX_ITERATIONS):
        r = reprojection_residuals(K, pose, points, pixels)
        jac = reprojection_jacobian(K, pose, points)
        grad = jac.T @ r
        if np.linalg.norm(grad) < GRADIENT_TOL:
            break
        h = jac.T @ jac
        stepped = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(h + lam * np.eye(6), -grad)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-6)
                continue
            dr = exp_so3(delta[:3])
            rot = _nearest_rotation(dr @ pose.rotation)
            cand = Pose(rot, dr @ pose.translation + delta[3:])
            cam_z = cand.transform(points)[:, 2]
            if (cam_z > 0).all():
                new_cost = float(
                    np.sum(reprojection_residuals(K, cand, points, pixels) ** 2)
                )
                if new_cost <= cost:
                    pose, cost = cand, new_cost
                    lam = lam / 10.0 if lam > 1e-12 else 0.0
                    stepped = True
                    break
            lam = max(lam * 10.0, 1e-6)
        if not stepped:
            break
    return pose, cost


def _dlt_pose(K, points, pixels) -> Pose:
    """Direct linear transform initialization for 6+ correspondences."""
    u = (pixels[:, 1] - K.cx) / K.fx
    v = (pixels[:, 0] - K.cy) / K.fy
    m = len(points)
    a = np.zeros((2 * m, 12))
    hom = np.hstack([points, np.ones((m, 1))])
    a[0::2, 0:4] = hom
    a[0::2, 8:12] = -u[:, None] * hom
    a[1::2, 4:8] = hom
    a[1::2, 8:12] = -v[:, None] * hom
    _, _, vt = np.linalg.svd(a)
    p = vt[-1].reshape(3, 4)
    # fix scale and sign so rotation rows are unit and depths positive
    scale = np.linalg.norm(p[2, :3])
    p /= scale
    if np.median(hom @ p[2]) < 0:
        p = -p
    rot = _nearest_rotation(p[:, :3])
    return Pose(rot, p[:, 3])


def _seed_poses(points) -> list[Pose]:
    """Deterministic rotation fan with a depth heuristic for small sets."""
    pts = np.asarray(points, dtype=float)
    centroid = pts.mean(axis=0)
    spread = float(np.linalg.norm(pts - centroid, axis=1).mean()) or 1.0
    axes = [
        np.array([0.0, 0.0, 1.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0),
    ]
    angles = [0.0, np.pi / 2, np.pi, 3 * np.pi / 2]
    seeds = []
    for axis in axes:
        for angle in angles:
            rot = exp_so3(axis * angle)
            # place the cloud centroid on the optical axis a few spreads out
            trans = np.array([0.0, 0.0, 4.0 * spread]) - rot @ centroid
            seeds.append(Pose(rot, trans))
    return seeds


def solve_pnp(K: CameraIntrinsics, points, pixels) -> Pose:
    """Pose minimizing squared reprojection error over the given pairs.

    points are world 3D, pixels are observed (row, col). Requires at
    least 4 non-coplanar points; uses DLT initialization at 6 or more,
    a 16-seed rotation fan below that.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    if len(points) != len(pixels):
        raise ValueError("points and pixels length mismatch")
    if len(points) < 4:
        raise InsufficientDataError(f"need >= 4 correspondences, got {len(points)}")
    if is_coplanar(points):
        raise DegenerateConfigurationError("points are coplanar")

    if len(points) >= 6:
        candidates = [_dlt_pose(K, points, pixels)]
    else:
        candidates = _seed_poses(points)

    best: tuple[float, Pose] | None = None
    for cand in candidates:
        if (cand.transform(points)[:, 2] <= 0).any():
            continue
        refined, cost = _refine(K, cand, points, pixels)
        if best is None or cost < best[0]:
            best = (cost, refined)
    if best is None:
        raise DegenerateConfigurationError("no candidate kept all points in front")
    return best[1]


def resolve_scale(map_points, pair: tuple[int, int], known_distance: float) -> np.ndarray:
    """Scale an up-to-scale map so one reconstructed pair matches a tape measure."""
    pts = np.asarray(map_points, dtype=float).reshape(-1, 3)
    i, j = pair
    if i == j:
        raise ValueError("pair indices must differ")
    d = float(np.linalg.norm(pts[i] - pts[j]))
    if d <= 0:
        raise ValueError("reconstructed pair is coincident")
    return pts * (known_distance / d)


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, radians."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def pose_error(estimate: Pose, truth: Pose) -> tuple[float, float]:
    """(rotation error rad, translation error m) between two poses."""
    return (
        rotation_angle(estimate.rotation @ truth.rotation.T),
        float(np.linalg.norm(estimate.translation - truth.translation)),
    )
