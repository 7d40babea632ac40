from __future__ import annotations

import json

import numpy as np
import pytest

from ursa import compositor
from ursa.cli import main
from ursa.world import FmssId

from conftest import chain_graph


def write_graph(tmp_path, n=11, spacing=10.0):
    g = chain_graph(n, spacing=spacing)
    path = tmp_path / "graph.json"
    path.write_text(json.dumps(g.to_json_obj()))
    return path


def run(args) -> int:
    return main([str(a) for a in args])


# -- plan / world / coverage -------------------------------------------------------


def test_plan_writes_checked_plan(tmp_path, capsys):
    graph = write_graph(tmp_path)
    out = tmp_path / "plan.json"
    assert run(["plan", "--graph", graph, "--dmin", 30, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["d_min"] == 30.0
    assert doc["poses"]
    stats = json.loads(capsys.readouterr().out)
    assert stats["min_separation_ok"] and stats["look_consistency_ok"]


def test_gen_world_coverage_pipeline(tmp_path, capsys):
    graph = write_graph(tmp_path)
    plan, world, report = tmp_path / "p.json", tmp_path / "w.json", tmp_path / "cov.json"
    assert run(["plan", "--graph", graph, "--out", plan]) == 0
    assert run(["gen-world", "--graph", graph, "--density", 10, "--seed", 3, "--out", world]) == 0
    capsys.readouterr()
    assert run(["coverage", "--graph", graph, "--plan", plan, "--world", world, "--out", report]) == 0
    doc = json.loads(report.read_text())
    assert 0.0 <= doc["coverage"] <= 1.0
    assert report.with_suffix(".png").exists()  # figure lands next to the report


def test_coverage_no_fig_flag(tmp_path, capsys):
    graph = write_graph(tmp_path)
    plan, world, report = tmp_path / "p.json", tmp_path / "w.json", tmp_path / "cov.json"
    run(["plan", "--graph", graph, "--out", plan])
    run(["gen-world", "--graph", graph, "--out", world])
    capsys.readouterr()
    assert run(["coverage", "--graph", graph, "--plan", plan, "--world", world,
                "--out", report, "--no-fig"]) == 0
    assert not report.with_suffix(".png").exists()


def test_identical_seeds_byte_identical_outputs(tmp_path, capsys):
    graph = write_graph(tmp_path)
    outs = []
    for name in ("a", "b"):
        world = tmp_path / f"{name}.json"
        plan = tmp_path / f"p_{name}.json"
        run(["gen-world", "--graph", graph, "--density", 25, "--seed", 9, "--out", world])
        run(["plan", "--graph", graph, "--dmin", 25, "--out", plan])
        outs.append((world.read_bytes(), plan.read_bytes()))
    capsys.readouterr()
    assert outs[0] == outs[1]


# -- composite / remap / iou ---------------------------------------------------------


def make_stack_file(tmp_path):
    lo = FmssId("a", "m", 0, 0)
    hi = FmssId("b", "m", 0, 0)
    grids = (
        (lo, np.array([[1.0, 0.2], [0.0, 0.5]])),
        (hi, np.array([[0.3, 0.8], [0.0, 0.5]])),
    )
    stack = compositor.ContributionStack(2, 2, grids)
    path = tmp_path / "frame.stack"
    with open(path, "wb") as fp:
        compositor.write_stack(stack, fp)
    labels = {"labels": [
        {"fmss": lo.to_json_obj(), "class_id": 21},
        {"fmss": hi.to_json_obj(), "class_id": 25},
    ]}
    labels_path = tmp_path / "labels.json"
    labels_path.write_text(json.dumps(labels))
    return path, labels_path


def test_composite_remap_iou_identity(tmp_path, capsys):
    stack, labels = make_stack_file(tmp_path)
    gt = tmp_path / "gt.ppm"
    assert run(["composite", "--stack", stack, "--labels", labels, "--out", gt]) == 0
    data = gt.read_bytes()
    assert data.startswith(b"P6\n2 2\n255\n")

    remapped = tmp_path / "cs.ppm"
    assert run(["remap", "--in", gt, "--out", remapped]) == 0

    report = tmp_path / "iou.json"
    assert run(["iou", "--pred", remapped, "--gt", remapped, "--out", report]) == 0
    doc = json.loads(report.read_text())
    assert doc["mean"] == 1.0
    assert all(v == 1.0 for v in doc["per_class"].values())
    assert report.with_suffix(".png").exists()


def test_composite_deterministic(tmp_path, capsys):
    stack, labels = make_stack_file(tmp_path)
    a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
    run(["composite", "--stack", stack, "--labels", labels, "--out", a])
    run(["composite", "--stack", stack, "--labels", labels, "--out", b])
    assert a.read_bytes() == b.read_bytes()


# -- votes pipeline -------------------------------------------------------------------


def test_simulate_aggregate_curve_stats(tmp_path, capsys):
    graph = write_graph(tmp_path)
    world = tmp_path / "w.json"
    run(["gen-world", "--graph", graph, "--density", 30, "--seed", 1, "--out", world])

    votes = tmp_path / "votes.ndjson"
    gold = tmp_path / "gold.json"
    assert run(["simulate-votes", "--world", world, "--classes", 10, "--p", 0.9,
                "--k", 7, "--seed", 5, "--out", votes, "--gold-out", gold]) == 0

    labeling = tmp_path / "labels.json"
    assert run(["aggregate", "--votes", votes, "--out", labeling]) == 0
    agg = json.loads(labeling.read_text())
    gold_doc = json.loads(gold.read_text())
    agreement = sum(
        1 for a, b in zip(agg["labels"], gold_doc["labels"]) if a == b
    ) / len(gold_doc["labels"])
    assert agreement > 0.9  # p=0.9 with 7 votes almost always recovers gold

    curve_out = tmp_path / "curve.csv"
    capsys.readouterr()
    assert run(["curve", "--votes", votes, "--gold", gold, "--kmax", 7,
                "--target", 0.75, "--out", curve_out]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["k_star"] is not None
    assert curve_out.exists() and curve_out.with_suffix(".png").exists()

    stats_out = tmp_path / "stats.json"
    assert run(["stats", "--votes", votes, "--out", stats_out]) == 0
    assert json.loads(stats_out.read_text())["mean_votes"] == 7.0


def test_curve_on_shipped_reference(tmp_path, capsys):
    from importlib import resources

    src = resources.files("ursa.data").joinpath("vote_accuracy_curve.csv")
    curve_path = tmp_path / "ref.csv"
    curve_path.write_text(src.read_text())
    assert run(["curve", "--curve", curve_path, "--target", 0.75, "--no-fig"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["k_star"] == 7


def test_tasks_round_trip(tmp_path, capsys):
    from ursa.annotation import segments_to_json_obj, Segment

    segments = [
        Segment(FmssId(f"f{i}", "m", 0, 0), f"s{i % 3}", 5, (0, 0, 1, 1)) for i in range(9)
    ]
    seg_path = tmp_path / "segments.json"
    seg_path.write_text(json.dumps(segments_to_json_obj(segments)))
    out = tmp_path / "tasks.json"
    assert run(["tasks", "--segments", seg_path, "--out", out]) == 0
    doc = json.loads(out.read_text())
    packed = [s for t in doc["tasks"] for s in t["segments"]]
    assert len(packed) == 9


# -- error handling -------------------------------------------------------------------


def test_missing_file_fails_with_json_error(tmp_path, capsys):
    assert run(["--json", "plan", "--graph", tmp_path / "nope.json", "--out", tmp_path / "o"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "error" in err


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_file_defaults_and_flag_override(tmp_path, capsys):
    graph = write_graph(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("dmin = 50\nseed = 4  # comment\n")
    out = tmp_path / "plan.json"
    assert run(["--config", cfg, "plan", "--graph", graph, "--out", out]) == 0
    assert json.loads(out.read_text())["d_min"] == 50.0
    assert run(["--config", cfg, "plan", "--graph", graph, "--dmin", 35, "--out", out]) == 0
    assert json.loads(out.read_text())["d_min"] == 35.0
