"""Median design cost of random feasible arm morphologies on a pose cloud.

Standalone numpy/scipy implementation used as the reference baseline for the
annealing acceptance check. It shares no code with the Rust crates: forward
kinematics, Jacobians, the SE(3) logarithm and the damped IK loop are all
written here from scratch.

    python3 scripts/baseline_cost.py crates/cli/tests/fixtures/all_tasks_cloud.csv
"""

import argparse
import csv
import json
import math

import numpy as np
from scipy.spatial.transform import Rotation

LIMIT = math.radians(170.0)
BOX = 0.5
TOOL = np.array([0.0, 0.0, -0.03])
W1 = np.array([1.0, 1.0, 1.0, 0.1, 0.1, 0.1])
W2 = 0.01
STEP, TOL, MAX_ITERS, DAMPING, RCOND = 0.5, 1e-6, 50, 1e-3, 1e-3


def hat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def exp_revolute(w, c, q):
    """Rotation by q about the line through c with unit direction w."""
    r = Rotation.from_rotvec(w * q).as_matrix()
    t = np.eye(4)
    t[:3, :3] = r
    t[:3, 3] = c - r @ c
    return t


def adjoint(t):
    r, p = t[:3, :3], t[:3, 3]
    a = np.zeros((6, 6))
    a[:3, :3] = r
    a[3:, 3:] = r
    a[3:, :3] = hat(p) @ r
    return a


def log_se3(t):
    """(w, v) with exp([w, v]) = t, rotation angle in [0, pi]."""
    r, p = t[:3, :3], t[:3, 3]
    w = Rotation.from_matrix(r).as_rotvec()
    th = np.linalg.norm(w)
    if th < 1e-9:
        return np.concatenate([w, p])
    wh = hat(w)
    # inverse of the left Jacobian of SO(3)
    if th < 1e-4:
        k = 1.0 / 12.0 + th * th / 720.0
    else:
        k = (1.0 - th * math.sin(th) / (4.0 * math.sin(0.5 * th) ** 2)) / th**2
    vinv = np.eye(3) - 0.5 * wh + k * (wh @ wh)
    return np.concatenate([w, vinv @ p])


class Arm:
    def __init__(self, axes, points, home):
        self.axes = axes
        self.points = points
        self.home = home

    def fk_jac(self, q):
        t = np.eye(4)
        jac = np.zeros((6, len(q)))
        for i, (w, c) in enumerate(zip(self.axes, self.points)):
            xi = np.concatenate([w, -np.cross(w, c)])
            jac[:, i] = adjoint(t) @ xi
            t = t @ exp_revolute(w, c, q[i])
        return t @ self.home, jac


def solve_ik(arm, target, seed):
    q = seed.copy()
    for it in range(MAX_ITERS + 1):
        t, jac = arm.fk_jac(q)
        v = adjoint(t) @ log_se3(np.linalg.inv(t) @ target)
        err = np.linalg.norm(v)
        if err <= TOL or it == MAX_ITERS:
            return q, v, err <= TOL
        a = jac @ jac.T
        ev = np.linalg.eigvalsh(a)
        if max(ev[0], 0.0) / ev[-1] < RCOND:
            a = a + DAMPING * np.eye(6)
        dq = jac.T @ np.linalg.solve(a, v)
        q = q + STEP * dq
        q = (q + math.pi) % (2 * math.pi) - math.pi
        q = np.clip(q, -LIMIT, LIMIT)


def design_cost(arm, cloud):
    seed = np.zeros(7)
    cost, prev = 0.0, None
    for sample in cloud:
        q, v, ok = solve_ik(arm, arm.home @ sample, seed)
        if not ok:
            cost += float(np.sum(W1 * v * v))
        if prev is not None:
            cost += W2 * float(np.sum((q - prev) ** 2))
        prev = q
        seed = q
    return cost


def random_design(rng):
    while True:
        u = rng.uniform(-1.0, 1.0, 7)
        phi = rng.uniform(-math.pi, math.pi, 7)
        s = np.sqrt(1.0 - u * u)
        axes = [np.array([s[i] * math.cos(phi[i]), s[i] * math.sin(phi[i]), u[i]]) for i in range(7)]
        pts = sorted(rng.uniform(-BOX, BOX, (5, 3)), key=np.linalg.norm)
        wrist = axes[4:]
        if any(abs(wrist[i] @ wrist[j]) > 0.999 for i, j in ((0, 1), (0, 2), (1, 2))):
            continue
        if abs(np.linalg.det(np.column_stack(wrist))) < 1e-6:
            continue
        points = pts + [pts[4], pts[4]]
        home = np.eye(4)
        home[:3, 3] = pts[4] + TOOL
        return Arm(axes, points, home)


def anthropomorphic():
    z, x, y = np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]
    pts = [np.array(p) for p in ((0, 0, 0.02), (0, 0, 0.04), (0.06, 0, 0.04), (0.12, 0, 0.04), (0.12, 0, -0.06))]
    home = np.eye(4)
    home[:3, 3] = pts[4] + TOOL
    return Arm([z, y, x, y, z, y, x], pts + [pts[4], pts[4]], home)


def read_cloud(path):
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            t = np.eye(4)
            q = [float(row[k]) for k in ("qx", "qy", "qz", "qw")]
            t[:3, :3] = Rotation.from_quat(q).as_matrix()
            t[:3, 3] = [float(row[k]) for k in ("x", "y", "z")]
            out.append(t)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("cloud")
    ap.add_argument("--designs", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--anthropomorphic", action="store_true", help="cost of the reference layout only")
    args = ap.parse_args()
    cloud = read_cloud(args.cloud)
    if args.anthropomorphic:
        print(json.dumps({"samples": len(cloud), "anthropomorphic": design_cost(anthropomorphic(), cloud)}))
        return
    rng = np.random.default_rng(args.seed)
    costs = [design_cost(random_design(rng), cloud) for _ in range(args.designs)]
    print(json.dumps({"samples": len(cloud), "designs": args.designs, "seed": args.seed,
                      "median": float(np.median(costs)), "costs": costs}, indent=1))


if __name__ == "__main__":
    main()
