"""Smoke test for the bimorph extension module.

Build and run from the workspace root:

    cargo build -p bimorph-py --release
    cp target/release/libbimorph.so python/bimorph.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import bimorph  # noqa: E402


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    # exp/log round trip
    w = [0.0, 0.6, 0.8]
    twist = w + [0.1, -0.2, 0.3]
    pose = bimorph.Pose.exp(twist, 1.2)
    screw, theta = pose.log()
    assert abs(theta - 1.2) < 1e-12
    assert close(screw, twist, 1e-12)
    ident = pose * pose.inverse()
    assert close(sum(ident.matrix(), []), sum(bimorph.Pose.identity().matrix(), []), 1e-12)

    design = bimorph.Design.anthropomorphic()
    assert len(design.to_vec()) == 32
    q = [0.2, -0.4, 0.3, -1.1, 0.5, 0.6, -0.2]
    target = design.fk(q)
    jac = design.jacobian(q)
    assert len(jac) == 6 and all(len(r) == 7 for r in jac)

    seed = [x + 0.05 for x in q]
    sol = design.ik(target, seed)
    assert sol["converged"], sol
    assert sol["residual"] <= 1e-6

    clone = bimorph.Design(design.to_vec())
    assert close(clone.to_vec(), design.to_vec(), 0.0)
    try:
        bimorph.Design([0.0] * 5)
    except ValueError:
        pass
    else:
        raise AssertionError("short parameter vector accepted")

    cloud = bimorph.PoseCloud.synthesize("pick_place", seed=3, duration=6.0, count=60)
    assert len(cloud) == 60
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "cloud.csv")
        cloud.write_csv(path)
        back = bimorph.PoseCloud.read_csv(path)
        assert len(back) == len(cloud)

    c0 = design.cost(cloud)
    best, trace = bimorph.optimize(cloud, max_iters=10, seed=1)
    assert len(trace) == 10
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert best.cost(cloud) <= c0 + 1e-12

    reports = bimorph.compare_dexterity([design, best], [cloud])
    assert len(reports) == 2 and len(reports[0]) == 1
    assert all(0.0 <= c <= 1.0 for c in reports[0][0]["composite"])

    run = bimorph.transition(best, informed=True, duration=0.5)
    assert run["tracking_error"] <= 1e-9
    assert len(run["t"]) == len(run["potential"])
    assert math.isfinite(run["composite_std"])

    print("bimorph smoke test ok: cost %.4f -> %.4f over %d samples" % (c0, best.cost(cloud), len(cloud)))


if __name__ == "__main__":
    main()
