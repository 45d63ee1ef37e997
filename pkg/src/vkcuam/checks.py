"""Task-completion checks evaluated on a finished episode.

Each built-in scenario carries a `checks` dict; these helpers turn an
EpisodeResult into named pass/fail outcomes with measured values.
"""

from __future__ import annotations

import numpy as np

from .geometry import rotation_log, rpy_to_matrix


def _inside_box(p, box) -> bool:
    return all(box[k][0] <= p[i] <= box[k][1] for i, k in enumerate(("x", "y", "z")))


def episode_checks(scenario, result) -> dict:
    """{name: (passed, measured, detail)} for the scenario's checks."""
    checks = scenario.checks
    out = {}
    log = result.log
    world = result.world
    out["completed"] = (not log.failed, 0.0 if log.failed else 1.0,
                        "episode ran all steps")
    if "articulated" in checks:
        name = checks["articulated"]
        q = log.column(f"obj_{name}")
        commanded = checks["open_value"]
        frac = float(q.max() / commanded)
        out["opened"] = (frac >= checks["open_fraction"], frac,
                         f"{name} reached {frac:.2f} of commanded range")
        closed = abs(float(q[-1]))
        out["reclosed"] = (closed <= checks["close_tol"], closed,
                           f"final {name} value {closed:.4f}")
    if "container" in checks and "free_object" in checks:
        obj = world.objects[checks["free_object"]]
        p = obj.free_pose.translation
        ok = _inside_box(p, checks["container"]) and world.attached != checks["free_object"]
        out["contained"] = (ok, float(p[0]), f"object at {np.round(p, 3)}")
    if "socket_pose" in checks:
        target_p = np.asarray(checks["socket_pose"]["xyz"], dtype=float)
        target_R = rpy_to_matrix(checks["socket_pose"]["rpy"])
        obj = world.objects[scenario.objects[0].name]
        pose = obj.free_pose
        pos_err = float(np.linalg.norm(pose.translation - target_p))
        ang_err = float(np.degrees(np.linalg.norm(rotation_log(target_R.T @ pose.rotation))))
        out["pose_position"] = (pos_err <= checks["pose_tol_m"], pos_err,
                                f"position error {pos_err * 100:.2f} cm")
        out["pose_angle"] = (ang_err <= checks["pose_tol_deg"], ang_err,
                             f"angle error {ang_err:.2f} deg")
    if "flip_min_deg" in checks:
        roll = np.degrees(log.column("roll"))
        pitch = np.degrees(log.column("pitch"))
        peak = float(max(np.max(np.abs(roll)), np.max(np.abs(pitch))))
        out["flip"] = (peak >= checks["flip_min_deg"], peak,
                       f"peak |roll/pitch| {peak:.1f} deg")
    return out


def all_passed(outcomes: dict) -> bool:
    return all(ok for ok, _, _ in outcomes.values())
