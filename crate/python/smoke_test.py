"""Smoke test for the compiled `reachset` extension module.

Build and run from the repository root:

    cargo build --release -p reachset-py --features extension-module
    cp target/release/libreachset_py.so python/reachset.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import reachset  # noqa: E402


def main():
    square = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]
    assert reachset.polygon_area(square) == 4.0
    assert reachset.point_in_polygon((1.0, 1.0), square)
    assert reachset.point_in_polygon((2.0, 1.0), square)  # boundary counts
    assert not reachset.point_in_polygon((3.0, 1.0), square)

    disk = reachset.Model.constant_speed(1.0)
    poly = disk.reachable_polygon((0.0, 0.0), (0.0, 0.0), 1.0)
    assert len(poly) == reachset.DEFAULT_N_VERTICES
    area = reachset.polygon_area(poly)
    assert abs(area / math.pi - 1.0) < 2.1e-4, area

    capped = reachset.Model.capped_accel(19.42, 8.91)
    radii = [math.hypot(x, y) for x, y in capped.reachable_polygon((0.0, 0.0), (0.0, 0.0), 1.0)]
    assert max(abs(r - 6.8660220) for r in radii) < 1e-6

    model = reachset.Model.from_json('{"model": "two_segment", "t_inert": 0.22, "keep_initial": true, "a_max": 19.42, "v_max": 8.91}')
    assert model.family == "two_segment"
    assert reachset.Model.from_json(model.to_json()) == model
    try:
        reachset.Model.constant_speed(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative speed accepted")

    trails = reachset.generate_synthetic("constant_speed", 2000, seed=3, v_true=8.0)
    assert len(trails) == 2000
    v_opt, score_opt = reachset.constant_speed_optimum(trails, hit_ratio_min=1.0)
    assert v_opt <= 8.0 * (1 + 1e-9) / math.cos(math.pi / 200)

    res = reachset.validate(reachset.Model.constant_speed(v_opt), trails, hit_ratio_min=1.0)
    assert res.hit_ratio == 1.0 and res.score == score_opt, res
    res = reachset.validate(reachset.Model.constant_speed(1.0), trails, hit_ratio_min=1.0)
    assert res.score == 0.0 and res.score_inv_m2 is None

    opt = reachset.optimize("a", trails, budget=30, seed=1, hit_ratio_min=1.0)
    assert opt.family == "constant_speed" and opt.evaluations == 30
    assert len(opt.trace) == 30
    assert opt.best_score <= score_opt * (1 + 1e-12)

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.csv")
        trails.save(path)
        again = reachset.TrailSet.load(path)
        assert again.to_list() == trails.to_list()
    assert trails[-1] == trails.to_list()[-1]

    manual = reachset.TrailSet([(0.0, 0.0, 1.0, 0.0, 0.5, 0.0, 1.0)])
    assert reachset.validate(disk, manual, hit_ratio_min=1.0).n_correct == 1

    print("python smoke test passed")


if __name__ == "__main__":
    main()
