"""Smoke tests for the dexgrasp python bindings.

Run through ctest (PYTHONPATH points at the built extension) or after a
`pip install .` in an environment with scikit-build-core available.
"""

import json
import math
import os
import tempfile

import pytest

import dexgrasp as dg


def test_geodesic_distance_basics():
    identity = [1, 0, 0, 0, 1, 0, 0, 0, 1]
    assert dg.geodesic_distance(identity, identity) == pytest.approx(0.0, abs=1e-6)
    half_turn = [-1, 0, 0, 0, -1, 0, 0, 0, 1]  # rot_z(pi)
    assert dg.geodesic_distance(identity, half_turn) == pytest.approx(math.pi, abs=1e-9)


def test_rotation6d_gram_schmidt():
    r = dg.rotation6d_to_rotation([2, 0, 0, 0, 3, 0])
    assert r == pytest.approx([1, 0, 0, 0, 1, 0, 0, 0, 1], abs=1e-12)
    with pytest.raises(dg.DexError):
        dg.rotation6d_to_rotation([0, 0, 0, 0, 1, 0])


def test_grasp_json_round_trip():
    g = dg.Grasp()
    g.translation = [0.01, -0.02, 0.05]
    g.joints = [0.3] * 12
    back = dg.Grasp.from_json(g.to_json())
    assert back.translation == pytest.approx(g.translation)
    assert json.loads(g.to_json())["t"] == pytest.approx([0.01, -0.02, 0.05])


def test_bps_encoding_basics():
    cloud = [[0.0, 0.0, 0.0], [0.3, 0.4, 0.0]]
    distances = dg.bps_encode(cloud, basis_size=16, seed=42)
    assert len(distances) == 16
    assert all(d >= 0 for d in distances)
    # Same seed, same basis: deterministic.
    assert distances == dg.bps_encode(cloud, basis_size=16, seed=42)


def test_metrics_against_known_values():
    gen = dg.Grasp()
    gen.translation = [1.0, 0.0, 0.0]
    gt = dg.Grasp()
    report = dg.magd([gen], [gt])
    assert report["d_transl"][0] == pytest.approx(1.0)
    cov = dg.coverage([gen], [gt])
    assert cov["cov"] == pytest.approx(1.0)


def test_ransac_removes_plane():
    import random

    rng = random.Random(3)
    cloud = [[rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0] for _ in range(500)]
    cloud += [[rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.02, 0.1)]
              for _ in range(100)]
    kept = dg.ransac_remove_plane(cloud, threshold=0.005, iterations=128, seed=1)
    assert len(kept) == 100
    assert all(p[2] > 0.005 for p in kept)


def test_cli_end_to_end_via_bindings(tmp_path):
    data = tmp_path / "data"
    run = tmp_path / "run"
    eval_run = tmp_path / "eval"
    assert dg.cli(["gen-data", "--objects", "6", "--views_per_object", "1",
                   "--grasps_per_label", "12", "--view_points", "384",
                   "--bps_size", "32", "--out", str(data)]) == 0
    assert dg.cli(["train-gan", "--data", str(data), "--out", str(run),
                   "--epochs", "1", "--width", "16", "--blocks", "1",
                   "--latent_dim", "4"]) == 0
    assert dg.cli(["train-eval", "--data", str(data), "--out", str(eval_run),
                   "--epochs", "1", "--batch", "16", "--width", "16",
                   "--blocks", "1"]) == 0

    grasps = dg.sample_grasps(str(run / "generator.ckpt"),
                              str(data / "scene_000"), n=25, seed=7)
    assert len(grasps) == 25
    again = dg.sample_grasps(str(run / "generator.ckpt"),
                             str(data / "scene_000"), n=25, seed=7)
    assert grasps[3].translation == again[3].translation

    scores = dg.score_grasps(str(eval_run / "evaluator.ckpt"),
                             str(data / "scene_000"), grasps)
    assert len(scores) == 25
    assert all(0.0 <= s <= 1.0 for s in scores)

    result = dg.run_afford_pipeline(str(run / "generator.ckpt"),
                                    str(eval_run / "evaluator.ckpt"),
                                    str(data / "hammer_000"), "use",
                                    n=30, k=10, seed=1)
    assert result["object_name"] == "hammer"
    assert result["part_name"] == "handle"
    assert result["stages"] == ["object_name", "part_name", "part_mask",
                                "crop", "sample_grasps", "knn_filter", "rank"]


def test_cli_usage_errors():
    assert dg.cli(["definitely-not-a-subcommand"]) == 2
