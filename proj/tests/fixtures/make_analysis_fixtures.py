#!/usr/bin/env python3
"""Writes synthetic episode logs and their hand-assigned labels.

Each scenario lists box keyframes and contact intervals. Labels are typed
in by hand below; the script only checks that the reward onset it derives
from the trajectory matches the labelled first success step.
"""
import json
import math
import os

DT = 0.046
T = 60
H = 0.025
TOL = 0.05


def trajectory(start, keys):
    """keys: {step: (x, y, z)}; linear between keyframes, hold after."""
    pts = {-1: start}
    pts.update(keys)
    steps = sorted(pts)
    out = []
    for t in range(T):
        prev = max(s for s in steps if s <= t)
        nxt = [s for s in steps if s > t]
        if not nxt:
            out.append(pts[prev])
            continue
        n = nxt[0]
        a = (t - prev) / (n - prev)
        out.append(tuple(p + a * (q - p) for p, q in zip(pts[prev], pts[n])))
    return out


def episode(index, name, target, start, keys, contact=(), grasp=()):
    pos = trajectory(start, keys)
    contact_steps = {t for a, b in contact for t in range(a, b + 1)}
    grasp_steps = {t for a, b in grasp for t in range(a, b + 1)}
    lines = [{
        "type": "episode", "variant": "wall", "seed": 1000 + index,
        "episode_index": index, "target": list(target), "box_start": list(start),
    }]
    for t in range(T):
        before = pos[t - 1] if t else start
        vel = [(q - p) / DT for p, q in zip(before, pos[t])]
        d = math.hypot(pos[t][0] - target[0], pos[t][1] - target[1])
        in_contact = t in contact_steps or t in grasp_steps
        gripper = [pos[t][0] - 0.03, pos[t][1], 0.03] if in_contact else [0.0, 0.0, 0.05]
        lines.append({
            "type": "step", "step": t, "gripper_pos": gripper,
            "finger_gap": 0.05 if t in grasp_steps else 0.08,
            "box_pos": list(pos[t]), "box_vel": vel, "action": [0.0, 0.0, 0.0, 0.0],
            "reward": 0.0 if d < TOL else -1.0,
            "contact": t in contact_steps, "grasped": t in grasp_steps,
        })
    return name, lines


START = (0.10, 0.0, H)

SCENARIOS = [
    episode(0, "idle", (0.45, 0.0, H), START, {}),
    episode(1, "nudge below threshold", (0.45, 0.0, H), START,
            {4: START, 7: (0.104, 0.0, H)}, contact=[(5, 7)]),
    episode(2, "hold without moving", (0.45, 0.0, H), START, {}, grasp=[(10, 14)]),
    episode(3, "punch over the wall", (0.45, 0.02, H), START,
            {7: START, 8: (0.12, 0.0, H), 9: (0.15, 0.0, H), 10: (0.20, 0.0, H),
             11: (0.25, 0.0, 0.06), 12: (0.30, 0.0, 0.08), 13: (0.35, 0.0, 0.07),
             14: (0.40, 0.0, 0.045), 15: (0.45, 0.0, H)},
            contact=[(8, 10)]),
    # Two grabs, the second one throws on target.
    episode(4, "two grabs and a throw", (0.40, 0.0, H), START,
            {6: START, 10: (0.18, 0.0, 0.06), 11: (0.21, 0.0, 0.05), 12: (0.23, 0.0, 0.035),
             13: (0.24, 0.0, H), 20: (0.24, 0.0, H), 25: (0.22, 0.0, 0.08),
             26: (0.27, 0.0, 0.09), 27: (0.30, 0.0, 0.09), 28: (0.33, 0.0, 0.07),
             29: (0.345, 0.0, 0.045), 30: (0.40, 0.0, H)},
            grasp=[(6, 10), (20, 25)]),
    episode(5, "slow push left at rest", (0.45, 0.0, H), START,
            {9: START, 20: (0.25, 0.0, H)}, contact=[(10, 20)]),
    episode(6, "punch then place", (0.256, 0.0, H), START,
            {4: START, 6: (0.12, 0.0, H), 7: (0.15, 0.0, H), 9: (0.20, 0.0, H),
             15: (0.20, 0.0, H), 25: (0.25, 0.0, H)},
            contact=[(5, 6)], grasp=[(15, 30)]),
    episode(7, "three misses", (0.45, 0.0, H), START,
            {4: START, 7: (0.10, -0.03, H), 19: (0.10, -0.03, H), 22: (0.10, -0.06, H),
             39: (0.10, -0.06, H), 42: (0.10, -0.09, H)},
            contact=[(5, 6), (20, 21), (40, 41)]),
    episode(8, "grasped at the end", (0.45, 0.0, H), START,
            {49: START, 59: (0.20, 0.0, 0.05)}, grasp=[(50, 59)]),
    episode(9, "on target then knocked off", (0.22, 0.0, H), START,
            {7: START, 9: (0.12, 0.0, H), 12: (0.20, 0.0, H), 40: (0.20, 0.0, H),
             42: (0.14, 0.0, H)},
            contact=[(8, 9), (41, 42)]),
]

# Hand labels: events as (kind, start, end), attempts, attempts before the
# successful one, first success step, success at the final step, kind of
# the deciding event.
LABELS = [
    {"events": [], "attempts": 0, "attempts_before_success": 0,
     "first_success_step": -1, "steps_remaining": 0, "success": False, "kind": "none"},
    {"events": [], "attempts": 0, "attempts_before_success": 0,
     "first_success_step": -1, "steps_remaining": 0, "success": False, "kind": "none"},
    {"events": [], "attempts": 0, "attempts_before_success": 0,
     "first_success_step": -1, "steps_remaining": 0, "success": False, "kind": "none"},
    {"events": [["punch", 8, 10]], "attempts": 1, "attempts_before_success": 0,
     "first_success_step": 15, "steps_remaining": 45, "success": True, "kind": "punch"},
    {"events": [["grab", 6, 10], ["grab", 20, 25]], "attempts": 2,
     "attempts_before_success": 1, "first_success_step": 30, "steps_remaining": 30,
     "success": True, "kind": "grab"},
    {"events": [["punch", 10, 20]], "attempts": 0, "attempts_before_success": 0,
     "first_success_step": -1, "steps_remaining": 0, "success": False, "kind": "punch"},
    {"events": [["punch", 5, 6], ["grab", 15, 30]], "attempts": 1,
     "attempts_before_success": 1, "first_success_step": 17, "steps_remaining": 43,
     "success": True, "kind": "grab"},
    {"events": [["punch", 5, 6], ["punch", 20, 21], ["punch", 40, 41]], "attempts": 3,
     "attempts_before_success": 3, "first_success_step": -1, "steps_remaining": 0,
     "success": False, "kind": "punch"},
    {"events": [["grab", 50, 59]], "attempts": 0, "attempts_before_success": 0,
     "first_success_step": -1, "steps_remaining": 0, "success": False, "kind": "grab"},
    # The knock-off leaves the box at rest, so it is not a release.
    {"events": [["punch", 8, 9], ["punch", 41, 42]], "attempts": 1,
     "attempts_before_success": 0, "first_success_step": 11, "steps_remaining": 49,
     "success": False, "kind": "punch"},
]


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    labels = []
    with open(os.path.join(here, "analysis_traces.jsonl"), "w", newline="\n") as f:
        for (name, lines), label in zip(SCENARIOS, LABELS):
            rewards = [l["reward"] for l in lines[1:]]
            first = rewards.index(0.0) if 0.0 in rewards else -1
            assert first == label["first_success_step"], (name, first)
            assert (rewards[-1] == 0.0) == label["success"], name
            for l in lines:
                f.write(json.dumps(l, separators=(",", ":")) + "\n")
            labels.append({"name": name, "episode_index": lines[0]["episode_index"], **label})
    with open(os.path.join(here, "analysis_labels.json"), "w") as f:
        json.dump(labels, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
