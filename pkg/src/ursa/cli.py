"""Command-line pipeline wiring every module into reproducible runs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import annotation, compositor, figures, roadgraph, service, taxonomy, viewplan, world


class CliError(Exception):
    """User-facing failure with a stable message."""


def _read_config(argv: list[str]) -> dict[str, str]:
    """key=value config file, flags win. '#' starts a comment."""
    if "--config" not in argv:
        return {}
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise CliError("--config needs a file path")
    path = argv[at + 1]
    cfg: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _load_graph(path: str) -> roadgraph.RoadGraph:
    return roadgraph.parse_road_graph(Path(path).read_bytes())


def _load_taxonomy(name_or_path: str) -> taxonomy.ClassTaxonomy:
    if name_or_path == "ursa":
        return taxonomy.ursa_taxonomy()
    if name_or_path == "cityscapes-eval":
        return taxonomy.cityscapes_eval_taxonomy()
    return taxonomy.load_taxonomy(Path(name_or_path).read_bytes())


def _load_palette(name_or_path: str) -> dict[int, tuple[int, int, int]]:
    if name_or_path == "ursa":
        return compositor.load_palette(taxonomy.ursa_palette_csv())
    if name_or_path == "cityscapes":
        return compositor.load_palette(taxonomy.cityscapes_palette_csv())
    return compositor.load_palette(Path(name_or_path).read_bytes())


def _load_labeling(path: str) -> compositor.FmssLabeling:
    return compositor.FmssLabeling.from_json_obj(json.loads(Path(path).read_text()))


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _fig_path(args, out_key: str = "out") -> Path | None:
    if getattr(args, "no_fig", False):
        return None
    if getattr(args, "fig", None):
        return Path(args.fig)
    out = getattr(args, out_key, None)
    if out:
        return Path(out).with_suffix(".png")
    return None


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _plan_pipeline(args) -> tuple[roadgraph.RoadGraph, viewplan.ViewPlan]:
    g = _load_graph(args.graph)
    part = roadgraph.partition_vertices(g)
    clusters, _ = roadgraph.cluster_interchanges(g, part, eps=args.eps, min_pts=args.min_pts)
    types = frozenset(roadgraph.RoadType(t.strip()) for t in args.road_types.split(","))
    cfg = viewplan.PlanConfig(d_min=args.dmin, allowed_road_types=types)
    plan = viewplan.select_viewpoints(g, part, clusters, cfg)
    return g, plan


def cmd_plan(args) -> int:
    g, plan = _plan_pipeline(args)
    sep = viewplan.check_min_separation(plan, g)
    look = viewplan.check_look_consistency(plan, g)
    if not (sep.ok and look.ok):
        raise CliError(f"internal: emitted plan failed checks: {sep} {look}")
    _write(args.out, viewplan.dump_plan(plan))
    stats = viewplan.plan_stats(plan, g)
    print(
        _dump_json(
            {
                "poses": stats.pose_count,
                "mean_nn_spacing": stats.mean_nn_spacing,
                "by_road_type": stats.by_road_type,
                "min_separation_ok": sep.ok,
                "look_consistency_ok": look.ok,
                "out": args.out,
            }
        ),
        end="",
    )
    return 0


def cmd_gen_world(args) -> int:
    g = _load_graph(args.graph)
    w = world.generate_world(
        g,
        density=args.density,
        rng_seed=args.seed,
        corridor_half_width=args.corridor_half_width,
        fmss_pool=args.fmss_pool,
    )
    _write(args.out, world.dump_world(w))
    print(_dump_json({"assets": len(w.assets), "distinct_fmss": len(w.distinct_fmss()), "out": args.out}), end="")
    return 0


def cmd_coverage(args) -> int:
    g = _load_graph(args.graph)
    plan = viewplan.load_plan(Path(args.plan).read_bytes(), g)
    w = world.load_world(Path(args.world).read_bytes())
    vp = world.VisibilityParams(d_max=args.dmax, fov=args.fov)
    report = world.coverage_of_plan(plan, w, vp, g)
    obj = {
        "coverage": report.fraction,
        "covered": len(report.covered),
        "uncovered": [f.to_json_obj() for f in sorted(report.uncovered)],
        "poses": len(plan.poses),
        "d_max": vp.d_max,
        "fov": vp.fov,
    }
    text = _dump_json(obj)
    if args.out:
        _write(args.out, text)
    else:
        print(text, end="")
    fig = _fig_path(args)
    if fig is not None:
        figures.coverage_figure(g, plan, w, report, fig)
    return 0


def cmd_composite(args) -> int:
    with open(args.stack, "rb") as fp:
        stack = compositor.read_stack(fp)
    labeling = _load_labeling(args.labels)
    palette = _load_palette(args.palette)
    label_map = compositor.assign_pixels(stack, labeling)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(compositor.encode_label_map(label_map, palette))
    return 0


def cmd_remap(args) -> int:
    palette_in = _load_palette(args.palette_in)
    palette_out = _load_palette(args.palette_out)
    table = (
        taxonomy.default_remap()
        if args.table == "default"
        else taxonomy.load_remap(Path(args.table).read_bytes())
    )
    m = compositor.decode_label_map(Path(args.input).read_bytes(), palette_in)
    out_map = taxonomy.remap_label_map(m, table)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(compositor.encode_label_map(out_map, palette_out))
    return 0


def cmd_iou(args) -> int:
    palette = _load_palette(args.palette)
    tax = _load_taxonomy(args.taxonomy)
    pred = compositor.decode_label_map(Path(args.pred).read_bytes(), palette)
    gt = compositor.decode_label_map(Path(args.gt).read_bytes(), palette)
    report = taxonomy.class_iou(pred, gt, tax, absent_as_zero=args.absent_as_zero)
    text = taxonomy.dump_iou_report(report, tax)
    if args.out:
        _write(args.out, text)
    else:
        print(text, end="")
    fig = _fig_path(args)
    if fig is not None:
        figures.iou_figure(report, tax, fig)
    return 0


def cmd_tasks(args) -> int:
    segments = annotation.segments_from_json_obj(json.loads(Path(args.segments).read_text()))
    tasks = annotation.build_tasks(segments, time_limit_minutes=args.time_limit)
    _write(args.out, _dump_json(annotation.tasks_to_json_obj(tasks)))
    print(_dump_json({"tasks": len(tasks), "segments": len(segments), "out": args.out}), end="")
    return 0


def cmd_serve(args) -> int:
    tasks = annotation.tasks_from_json_obj(json.loads(Path(args.tasks).read_text()))
    tax = _load_taxonomy(args.taxonomy)
    palette = _load_palette(args.palette)
    svc = service.AnnotationService(
        tasks, tax, palette, data_dir=args.data_dir, worker_quota=args.quota
    )
    static_root = Path(args.data_dir) / "static"
    server = service.make_server(
        svc, port=args.port, static_root=static_root, ui_root=args.ui_dir
    )
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (data: {args.data_dir})", flush=True)
    service.serve_forever(server)
    return 0


def cmd_simulate_votes(args) -> int:
    if args.gold:
        gold = _load_labeling(args.gold)
    elif args.world:
        w = world.load_world(Path(args.world).read_bytes())
        rng = np.random.default_rng(args.seed)
        ids = sorted(w.distinct_fmss())
        gold = compositor.FmssLabeling(
            {f: int(rng.integers(0, args.classes)) for f in ids}
        )
    else:
        raise CliError("need --gold or --world")
    model = annotation.AnnotatorModel(args.p, args.classes, args.seed)
    ballots = annotation.simulate_votes(gold, model, args.k)
    votes = [v for b in ballots for v in b.votes]
    _write(args.out, annotation.dump_votes(votes))
    if args.gold_out:
        _write(args.gold_out, _dump_json(gold.to_json_obj()))
    print(_dump_json({"ballots": len(ballots), "votes": len(votes), "out": args.out}), end="")
    return 0


def cmd_aggregate(args) -> int:
    store = annotation.store_from_votes(annotation.load_votes(Path(args.votes).read_bytes()))
    labeling = annotation.aggregate_labels(store.ballots())
    _write(args.out, _dump_json(labeling.to_json_obj()))
    print(_dump_json({"labels": len(labeling.classes), "out": args.out}), end="")
    return 0


def cmd_curve(args) -> int:
    if args.curve:
        points = annotation.load_curve(Path(args.curve).read_bytes())
    elif args.votes and args.gold:
        store = annotation.store_from_votes(annotation.load_votes(Path(args.votes).read_bytes()))
        gold = _load_labeling(args.gold)
        for fmss, cid in gold.classes.items():
            store.set_gold(fmss, cid)
        points = annotation.accuracy_vs_votes(store.ballots(), args.kmax)
    else:
        raise CliError("need --curve, or --votes with --gold")
    k_star = annotation.diminishing_returns_point(points, target=args.target)
    if args.out:
        _write(args.out, annotation.save_curve(points))
    fig = _fig_path(args)
    if fig is not None:
        figures.curve_figure(points, args.target, k_star, fig)
    print(
        _dump_json(
            {
                "k_star": k_star,
                "target": args.target,
                "points": [{"k": p.k, "accuracy": p.accuracy, "stderr": p.stderr} for p in points],
            }
        ),
        end="",
    )
    return 0


def cmd_stats(args) -> int:
    store = annotation.store_from_votes(annotation.load_votes(Path(args.votes).read_bytes()))
    if args.segments:
        segments = annotation.segments_from_json_obj(json.loads(Path(args.segments).read_text()))
        for fmss, count in annotation.scene_counts(segments).items():
            store.set_scene_count(fmss, count)
    ballots = store.ballots()
    stats = annotation.vote_stats(ballots, threshold=args.threshold)
    obj = {
        "mean_votes": stats.mean_votes,
        "eligible": stats.eligible,
        "excluded": stats.excluded,
        "excluded_fraction": stats.excluded_fraction,
        "threshold": stats.threshold,
        "threshold_percentile": stats.threshold_percentile,
    }
    text = _dump_json(obj)
    if args.out:
        _write(args.out, text)
    else:
        print(text, end="")
    fig = _fig_path(args)
    if fig is not None:
        histogram: dict[int, int] = {}
        for b in ballots:
            histogram[len(b.votes)] = histogram.get(len(b.votes), 0) + 1
        figures.vote_histogram_figure(histogram, args.threshold, fig)
    return 0


def _add_fig_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fig", help="figure output path (default: alongside --out)")
    p.add_argument("--no-fig", action="store_true", help="skip figure rendering")


def build_parser(cfg: dict[str, str]) -> argparse.ArgumentParser:
    def cv(key: str, fallback, cast):
        return cast(cfg[key]) if key in cfg else fallback

    parser = argparse.ArgumentParser(
        prog="ursa",
        description="Road-scene view planning, label compositing, and annotation vote tooling.",
    )
    parser.add_argument("--config", help="key=value config file; flags win")
    parser.add_argument("--json", action="store_true", help="machine-readable errors on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="select view poses from a road graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--dmin", type=float, default=cv("dmin", 30.0, float))
    p.add_argument("--road-types", default=cv("road_types", "major", str))
    p.add_argument("--eps", type=float, default=cv("eps", 25.0, float))
    p.add_argument("--min-pts", type=int, default=cv("min_pts", 3, int))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen-world", help="generate a synthetic asset world")
    p.add_argument("--graph", required=True)
    p.add_argument("--density", type=float, default=cv("density", 20.0, float))
    p.add_argument("--seed", type=int, default=cv("seed", 0, int))
    p.add_argument("--corridor-half-width", type=float, default=cv("corridor_half_width", 5.0, float))
    p.add_argument("--fmss-pool", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_world)

    p = sub.add_parser("coverage", help="report plan coverage over a world")
    p.add_argument("--graph", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--dmax", type=float, default=cv("dmax", 100.0, float))
    p.add_argument("--fov", type=float, default=cv("fov", 90.0, float))
    p.add_argument("--out")
    _add_fig_flags(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("composite", help="contribution stack + labeling -> label PPM")
    p.add_argument("--stack", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--palette", default=cv("palette", "ursa", str))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_composite)

    p = sub.add_parser("remap", help="remap a label PPM onto another taxonomy")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--table", default="default")
    p.add_argument("--palette-in", default=cv("palette", "ursa", str))
    p.add_argument("--palette-out", default="cityscapes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_remap)

    p = sub.add_parser("iou", help="per-class IOU between two label PPMs")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--palette", default=cv("palette", "cityscapes", str))
    p.add_argument("--taxonomy", default=cv("taxonomy", "cityscapes-eval", str))
    p.add_argument("--absent-as-zero", action="store_true")
    p.add_argument("--out")
    _add_fig_flags(p)
    p.set_defaults(func=cmd_iou)

    p = sub.add_parser("tasks", help="pack segments into annotation tasks")
    p.add_argument("--segments", required=True)
    p.add_argument("--time-limit", type=float, default=cv("time_limit", 20.0, float))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tasks)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--tasks", required=True)
    p.add_argument("--taxonomy", default=cv("taxonomy", "ursa", str))
    p.add_argument("--palette", default=cv("palette", "ursa", str))
    p.add_argument("--data-dir", required=True)
    p.add_argument("--port", type=int, default=cv("port", 8080, int))
    p.add_argument("--quota", type=int, default=cv("quota", 7, int))
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate-votes", help="synthesize annotator votes against gold")
    p.add_argument("--gold", help="labeling JSON used as ground truth")
    p.add_argument("--world", help="derive gold labels for a world's identifiers")
    p.add_argument("--classes", type=int, default=cv("classes", 28, int))
    p.add_argument("--p", type=float, default=cv("p", 0.75, float))
    p.add_argument("--k", type=int, default=cv("k", 7, int))
    p.add_argument("--seed", type=int, default=cv("seed", 0, int))
    p.add_argument("--out", required=True)
    p.add_argument("--gold-out")
    p.set_defaults(func=cmd_simulate_votes)

    p = sub.add_parser("aggregate", help="plurality labels from a votes log")
    p.add_argument("--votes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("curve", help="accuracy-vs-votes curve and diminishing-returns point")
    p.add_argument("--votes")
    p.add_argument("--gold")
    p.add_argument("--curve", help="load a precomputed k,accuracy,stderr CSV")
    p.add_argument("--kmax", type=int, default=cv("kmax", 19, int))
    p.add_argument("--target", type=float, default=cv("target", 0.75, float))
    p.add_argument("--out")
    _add_fig_flags(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("stats", help="vote statistics over a votes log")
    p.add_argument("--votes", required=True)
    p.add_argument("--segments")
    p.add_argument("--threshold", type=int, default=cv("threshold", 11, int))
    p.add_argument("--out")
    _add_fig_flags(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = _read_config(argv)
        parser = build_parser(cfg)
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        _print_error(argv, str(exc))
        return 1
    except Exception as exc:  # file/format/domain errors share one exit path
        _print_error(argv, f"{type(exc).__name__}: {exc}")
        return 1


def _print_error(argv: list[str], message: str) -> None:
    if "--json" in argv:
        print(json.dumps({"error": message}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
