"""Signed distances between convex primitives (sphere, capsule, box).

Positive values are separation, negative values penetration depth.
Primitive frames: spheres are centered at the origin; capsules run along
local z from -half_length to +half_length with hemispherical caps; boxes
are axis-aligned in their own frame with half extents (hx, hy, hz).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RigidTransform

WORLD = "world"


class UnsupportedPairError(ValueError):
    pass


@dataclass(frozen=True)
class CollisionPrimitive:
    kind: str  # sphere | capsule | box
    dimensions: tuple
    attached_to: str = WORLD
    offset: RigidTransform = field(default_factory=RigidTransform.identity)
    name: str = ""

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        expected = {"sphere": 1, "capsule": 2, "box": 3}
        if self.kind not in expected:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        if len(dims) != expected[self.kind]:
            raise ValueError(
                f"{self.kind} takes {expected[self.kind]} dimension(s), got {len(dims)}"
            )
        if any(d <= 0.0 for d in dims):
            raise ValueError(f"{self.kind} dimensions must be positive: {dims}")
        object.__setattr__(self, "dimensions", dims)


@dataclass(frozen=True)
class CollisionWorld:
    """Static world obstacles for planning; all primitives world-attached."""

    obstacles: tuple = ()

    def __post_init__(self):
        obs = tuple(self.obstacles)
        for o in obs:
            if o.attached_to != WORLD:
                raise ValueError(f"world obstacle {o.name!r} attached to {o.attached_to!r}")
        object.__setattr__(self, "obstacles", obs)


def _capsule_segment(pose: RigidTransform, half_length: float):
    axis = pose.rotation[:, 2]
    return pose.translation - half_length * axis, pose.translation + half_length * axis


def _point_box_sd(p: np.ndarray, half: np.ndarray):
    """Signed distance and witness data for a point vs an origin-centered box."""
    q = np.abs(p) - half
    outside = np.maximum(q, 0.0)
    d_out = float(np.sqrt(outside @ outside))
    if d_out > 0.0:
        closest = np.clip(p, -half, half)
        n = p - closest
        n /= np.linalg.norm(n)
        return d_out, closest, n
    # inside: push out through the nearest face
    k = int(np.argmax(q))
    d_in = float(q[k])
    n = np.zeros(3)
    n[k] = 1.0 if p[k] >= 0.0 else -1.0
    closest = p.copy()
    closest[k] = half[k] * n[k]
    return d_in, closest, n


def _segment_closest(p1, q1, p2, q2):
    """Closest points between segments [p1,q1] and [p2,q2] (Ericson 5.1.9)."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    eps = 1e-12
    if a <= eps and e <= eps:
        return p1, p2
    if a <= eps:
        t = np.clip(f / e, 0.0, 1.0)
        return p1, p2 + t * d2
    c = d1 @ r
    if e <= eps:
        s = np.clip(-c / a, 0.0, 1.0)
        return p1 + s * d1, p2
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > eps else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0)
    elif t > 1.0:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0)
    return p1 + s * d1, p2 + t * d2


def _segment_box_sd(p0, p1, box_pose: RigidTransform, half):
    """Min signed distance from segment to box: compiled scan + ternary
    refinement for the minimizer, witness data recovered at the optimum."""
    from . import kernels

    Rb = box_pose.rotation
    tb = box_pose.translation
    a = Rb.T @ (p0 - tb)
    b = Rb.T @ (p1 - tb)
    half = np.asarray(half, dtype=float)
    _, s_best = kernels.seg_box_sd(a, b, half)
    p_loc = a + s_best * (b - a)
    d, closest, n = _point_box_sd(p_loc, half)
    w_seg = Rb @ p_loc + tb
    w_box = Rb @ closest + tb
    n_world = Rb @ n
    return d, w_seg, w_box, n_world


def signed_distance_witness(a: CollisionPrimitive, pose_a: RigidTransform,
                            b: CollisionPrimitive, pose_b: RigidTransform):
    """(distance, point_on_a, point_on_b, normal_b_to_a) in world frame.

    The returned points are on the primitive surfaces; for penetrating
    pairs the normal still points from b toward a along the separation
    axis, which is what the planner gradient needs.
    """
    ka, kb = a.kind, b.kind
    if (kb, ka) in _DISPATCH and (ka, kb) not in _DISPATCH:
        d, pb, pa, n = signed_distance_witness(b, pose_b, a, pose_a)
        return d, pa, pb, -n
    try:
        fn = _DISPATCH[(ka, kb)]
    except KeyError:
        raise UnsupportedPairError(f"no signed-distance formula for ({ka}, {kb})")
    return fn(a, pose_a, b, pose_b)


def signed_distance(a: CollisionPrimitive, pose_a: RigidTransform,
                    b: CollisionPrimitive, pose_b: RigidTransform) -> float:
    return signed_distance_witness(a, pose_a, b, pose_b)[0]


def _safe_dir(v):
    n = np.linalg.norm(v)
    if n < 1e-12:
        return np.array([0.0, 0.0, 1.0])
    return v / n


def _sphere_sphere(a, pa, b, pb):
    ra, rb = a.dimensions[0], b.dimensions[0]
    delta = pa.translation - pb.translation
    n = _safe_dir(delta)
    d = float(np.linalg.norm(delta)) - ra - rb
    return d, pa.translation - ra * n, pb.translation + rb * n, n


def _sphere_capsule(a, pa, b, pb):
    ra, (rb, hb) = a.dimensions[0], b.dimensions
    s0, s1 = _capsule_segment(pb, hb)
    c = pa.translation
    seg = s1 - s0
    t = float(np.clip((c - s0) @ seg / max(seg @ seg, 1e-16), 0.0, 1.0))
    q = s0 + t * seg
    n = _safe_dir(c - q)
    d = float(np.linalg.norm(c - q)) - ra - rb
    return d, c - ra * n, q + rb * n, n


def _capsule_capsule(a, pa, b, pb):
    (ra, ha), (rb, hb) = a.dimensions, b.dimensions
    a0, a1 = _capsule_segment(pa, ha)
    b0, b1 = _capsule_segment(pb, hb)
    qa, qb = _segment_closest(a0, a1, b0, b1)
    n = _safe_dir(qa - qb)
    d = float(np.linalg.norm(qa - qb)) - ra - rb
    return d, qa - ra * n, qb + rb * n, n


def _sphere_box(a, pa, b, pb):
    ra = a.dimensions[0]
    half = np.asarray(b.dimensions)
    inv = pb.inverse()
    d, closest, n = _point_box_sd(inv.apply(pa.translation), half)
    n_world = pb.rotation @ n
    return d - ra, pa.translation - ra * n_world, pb.apply(closest), n_world


def _capsule_box(a, pa, b, pb):
    ra, ha = a.dimensions
    half = np.asarray(b.dimensions)
    p0, p1 = _capsule_segment(pa, ha)
    d, w_seg, w_box, n = _segment_box_sd(p0, p1, pb, half)
    return d - ra, w_seg - ra * n, w_box, n


_DISPATCH = {
    ("sphere", "sphere"): _sphere_sphere,
    ("sphere", "capsule"): _sphere_capsule,
    ("capsule", "capsule"): _capsule_capsule,
    ("sphere", "box"): _sphere_box,
    ("capsule", "box"): _capsule_box,
}


def supported_pair(kind_a: str, kind_b: str) -> bool:
    return (kind_a, kind_b) in _DISPATCH or (kind_b, kind_a) in _DISPATCH


def bounding_radius(p: CollisionPrimitive) -> float:
    """Radius of a sphere centered at the primitive frame origin that
    encloses it; used for broad-phase pruning."""
    if p.kind == "sphere":
        return p.dimensions[0]
    if p.kind == "capsule":
        return p.dimensions[0] + p.dimensions[1]
    return float(np.linalg.norm(p.dimensions))
