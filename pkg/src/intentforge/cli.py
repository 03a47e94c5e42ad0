"""Command-line surface: synth, infer, predict, eval, cluster, render, sweep."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .engine import documents, pipeline, raster
from .engine.builder import FigureBuilder, FigureDocument
from .engine.config import RunConfig, list_presets, resolve_config
from .engine.fields import FieldCache
from .engine.planner import path_likelihood_map
from .engine.synth import generate_archetype_suite, synthesize
from .errors import (
    ConfigError,
    GenerationError,
    InferenceError,
    InputError,
    PredictionError,
)

logger = logging.getLogger("intentforge")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3

FIGURE_KINDS = ("mask", "arrows", "trajectories", "likelihood", "clusters")


# -- Configuration -----------------------------------------------------------------


def _overrides(args: argparse.Namespace) -> dict:
    """CLI flags as a nested config dict; only flags that were given."""
    out: dict = {}

    def put(group: str, key: str, value) -> None:
        if value is not None:
            out.setdefault(group, {})[key] = value

    if args.seed is not None:
        for group in ("synth", "chain", "cluster"):
            put(group, "seed", args.seed)
    for flag, group, key in (
        ("sources", "synth", "n_sources"),
        ("agents", "synth", "n_agents"),
        ("width", "synth", "width"),
        ("height", "synth", "height"),
        ("obstacle_ratio", "synth", "obstacle_ratio"),
        ("observed_fraction", "synth", "observed_fraction"),
        ("iterations", "chain", "iterations"),
        ("burn_in", "chain", "burn_in"),
        ("k", "cluster", "k"),
        ("cell_size", "render", "cell_size"),
        ("stride", "render", "arrow_stride"),
        ("online_mode", "predictor", "online_mode"),
    ):
        put(group, key, getattr(args, flag, None))
    return out


def load_run(args: argparse.Namespace, default_preset: str | None = None) -> tuple[RunConfig, dict]:
    """defaults < preset < --config file < flags."""
    raw = resolve_config(args.config, _overrides(args), args.preset or default_preset)
    run = RunConfig.from_dict(raw)
    return run, run.to_dict()


def _seed(args: argparse.Namespace, run: RunConfig) -> int:
    return args.seed if args.seed is not None else run.chain.seed


def _manifest_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".manifest.json"))


def write_manifest(command: str, config: dict, seed: int | None, inputs: list[str], outputs: list[str], started: float) -> str:
    path = _manifest_path(outputs[0])
    doc = documents.manifest(command, config, seed, inputs, outputs, time.monotonic() - started)
    documents.write_json(path, doc)
    logger.debug("manifest %s", path)
    return path


def _state_for(args: argparse.Namespace, scene):
    if getattr(args, "relations", "inferred") == "truth":
        return pipeline.truth_state(scene)
    if not args.state:
        raise InputError("--state is required unless --relations truth is given")
    return documents.load_state(args.state, scene.lattice)


def _inputs(*paths) -> list[str]:
    return [p for p in paths if p]


# -- Commands ----------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    if args.archetypes:
        scene = generate_archetype_suite(seed=run.synth.seed, n_sources=args.sources or 30)
    else:
        scene = synthesize(run.synth)
    documents.save_scene(args.out, scene)
    write_manifest("synth", snapshot, run.synth.seed, _inputs(args.config), [args.out], started)
    print(f"wrote {args.out} ({scene.name})")
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    scene = documents.load_scene(args.scene)
    inference = pipeline.infer_scene(scene, run)
    doc = documents.state_to_dict(inference.state, scene.name, inference.diagnostics())
    documents.write_json(args.out, doc)
    trace = args.trace or str(Path(args.out).with_name(Path(args.out).stem + ".trace.csv"))
    inference.trace.to_csv(trace, index=False, lineterminator="\n", float_format="%.10g")
    write_manifest("infer", snapshot, run.chain.seed, _inputs(args.scene, args.config), [args.out, trace], started)
    print(f"wrote {args.out}: {inference.state.n_sources} sources, log posterior {inference.state.log_post:.4f}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    scene = documents.load_scene(args.scene)
    state = _state_for(args, scene)
    seed = _seed(args, run)
    ctx = pipeline.prediction_context(scene, state, run, seed)
    predictions = pipeline.predict_scene(ctx, args.mode)
    documents.write_json(args.out, documents.predictions_to_dict(predictions, args.mode, scene.name))
    write_manifest("predict", snapshot, seed, _inputs(args.scene, args.state, args.config), [args.out], started)
    print(f"wrote {args.out}: {len(predictions)} {args.mode} predictions")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    scene = documents.load_scene(args.scene)
    predictions = None
    if args.predictions:
        _, predictions = documents.load_predictions(args.predictions)
    state = _state_for(args, scene) if (args.state or args.relations == "truth") else None
    report = pipeline.evaluate_scene(scene, predictions, state, run, args.literal_relations)
    documents.write_json(args.out, documents.report_to_dict(report, scene.name))
    outputs = [args.out]
    if args.summary:
        pd.DataFrame([report.summary_row()]).to_csv(
            args.summary, index=False, lineterminator="\n", float_format="%.10g",
        )
        outputs.append(args.summary)
    write_manifest(
        "eval", snapshot, None, _inputs(args.scene, args.predictions, args.state, args.config),
        outputs, started,
    )
    for key, value in report.summary_row().items():
        print(f"{key}: {value}")
    return EXIT_OK


def cmd_cluster(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    scene = documents.load_scene(args.scene)
    state = _state_for(args, scene)
    clusters, score = pipeline.cluster_scene(scene, state, run)
    labels = scene.truth.archetypes if scene.truth is not None else None
    documents.write_json(args.out, documents.clusters_to_dict(clusters, labels, score, scene.name))
    outputs = [args.out]
    if args.figure:
        document = FigureDocument(title=f"{scene.name} clusters").add("clusters", clusters=clusters)
        Path(args.figure).write_bytes(FigureBuilder(run.render).build(document))
        outputs.append(args.figure)
    write_manifest("cluster", snapshot, run.cluster.seed, _inputs(args.scene, args.state, args.config), outputs, started)
    print(f"wrote {args.out}: labels {clusters.result.labels.tolist()}")
    if score is not None:
        print(f"purity: {score:.4f}")
    return EXIT_OK


def _figure(args: argparse.Namespace, scene, run: RunConfig) -> tuple[FigureDocument, np.ndarray | None]:
    """The figure document of ``args.kind`` and the array behind it for ``--graymap``."""
    state = None
    if args.state or args.relations == "truth":
        state = _state_for(args, scene)
    sources = state.sources if state is not None else (scene.truth.sources if scene.truth else scene.sources)
    cmap = state.cmap if state is not None else scene.cmap
    boxes = scene.truth.boxes if scene.truth is not None else []
    document = FigureDocument(title=args.title or scene.name)

    if args.kind == "mask":
        document.add("mask", scene=scene, cmap=cmap, sources=sources, boxes=boxes)
        return document, np.where(cmap > 0, 1.0, 0.0)
    if args.kind == "trajectories":
        predictions = documents.load_predictions(args.predictions)[1] if args.predictions else []
        document.add(
            "trajectories", scene=scene, cmap=cmap, sources=sources,
            predictions=predictions, truth=args.truth,
        )
        return document, None
    if args.kind == "clusters":
        if state is None:
            raise InputError("--kind clusters needs --state or --relations truth")
        clusters, _ = pipeline.cluster_scene(scene, state, run)
        document.add("clusters", clusters=clusters)
        return document, None

    if not sources:
        raise InputError(f"--kind {args.kind} needs sources (from --state or the scene truth)")
    if not 0 <= args.source < len(sources):
        raise InputError(f"--source {args.source} outside 0..{len(sources) - 1}")
    view = scene.with_cmap(cmap)
    field_ = FieldCache(scene.lattice.shape, run.fields).cumulative(view, sources[args.source].mu)
    if args.kind == "arrows":
        document.add("arrows", scene=view, field=field_, sources=sources)
        return document, field_.magnitude()

    ids = [a.id for a in scene.agents]
    if args.agent not in ids:
        raise InputError(f"--agent {args.agent!r} not in scene {scene.name!r}")
    agent = scene.agents[ids.index(args.agent)]
    params = run.model.path
    lams = args.lam or [params.lam]
    for lam in lams:
        document.add(
            "likelihood", scene=view, field=field_, start=agent.last_cell,
            goal=sources[args.source].mu, params=params, lam=lam,
        )
    values = path_likelihood_map(
        view, field_, agent.last_cell, sources[args.source].mu,
        replace(params, lam=lams[0]),
    )
    return document, values


def cmd_render(args: argparse.Namespace) -> int:
    started = time.monotonic()
    run, snapshot = load_run(args)
    scene = documents.load_scene(args.scene)
    document, values = _figure(args, scene, run)
    pdf = FigureBuilder(run.render).build(document)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(pdf)
    outputs = [args.out]
    if args.raster:
        outputs += [str(p) for p in raster.pdf_to_ppm(pdf, args.raster)]
    if args.graymap:
        if values is None:
            raise InputError(f"--graymap is not available for --kind {args.kind}")
        if args.kind == "mask":
            raster.mask_to_pgm(values, args.graymap, run.render.cell_size)
        else:
            raster.array_to_pgm(values, args.graymap, run.render.cell_size)
        outputs.append(args.graymap)
    write_manifest(
        "render", snapshot, None,
        _inputs(args.scene, args.state, getattr(args, "predictions", None), args.config),
        outputs, started,
    )
    print(f"wrote {', '.join(outputs)}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.monotonic()
    default = {"toy": "toy_sweep", "intent": "intent_suite", "archetypes": None}[args.suite]
    run, snapshot = load_run(args, default)
    outputs = [args.out]
    if args.suite == "toy":
        summary = pipeline.toy_sweep(run)
        summary.to_csv(args.out, index=False, lineterminator="\n", float_format="%.10g")
        if args.table:
            pipeline.sweep_table(summary).to_csv(args.table, lineterminator="\n", float_format="%.10g")
            outputs.append(args.table)
        print(pipeline.sweep_table(summary).to_string(float_format=lambda v: f"{v:.3f}"))
    elif args.suite == "intent":
        scene, reports = pipeline.intent_suite(run, args.relations)
        documents.write_json(args.out, documents.suite_to_dict(reports, scene.name))
        for method, report in reports.items():
            for key, value in report.summary_row().items():
                if key.startswith(("ap_", "cue_ap_")) or key == "intent_accuracy":
                    print(f"{method} {key}: " + ("n/a" if value is None else f"{value:.4f}"))
    else:
        rows = []
        for seed in args.seeds or [run.cluster.seed]:
            scene, clusters, score = pipeline.archetype_clusters(run, seed)
            rows.append({"scene": scene.name, "seed": seed, "k": run.cluster.k, "purity": score})
        table = pd.DataFrame(rows)
        table.to_csv(args.out, index=False, lineterminator="\n", float_format="%.10g")
        print(table.to_string(index=False))
    write_manifest(f"sweep-{args.suite}", snapshot, args.seed, _inputs(args.config), outputs, started)
    return EXIT_OK


# -- Parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (merged over the defaults preset)")
    common.add_argument("--preset", help=f"shipped preset, one of: {', '.join(list_presets())}")
    common.add_argument("--seed", type=int, help="seed for every random stream of the run")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(
        prog="intentforge",
        description="Infer obstacles, sources and intents from partial trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a toy scene with ground truth")
    p.add_argument("--out", required=True, help="scene document to write")
    p.add_argument("--sources", type=int, help="number of sources |S|")
    p.add_argument("--agents", type=int, help="number of agents |A|")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--obstacle-ratio", type=float)
    p.add_argument("--observed-fraction", type=float)
    p.add_argument("--archetypes", action="store_true", help="queue/dwell/exit clustering suite instead")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("infer", parents=[common], help="MCMC over constraint map, sources and relations")
    p.add_argument("scene")
    p.add_argument("--out", required=True, help="state document to write")
    p.add_argument("--trace", help="trace CSV (default: <out>.trace.csv)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.set_defaults(func=cmd_infer)

    def with_state(p: argparse.ArgumentParser) -> None:
        p.add_argument("--state", help="inferred state document")
        p.add_argument(
            "--relations", choices=pipeline.RELATION_MODES, default="inferred",
            help="'truth' uses the scene's generating sources and relations",
        )

    p = sub.add_parser("predict", parents=[common], help="predict future trajectories")
    p.add_argument("scene")
    with_state(p)
    p.add_argument("--mode", choices=pipeline.METHODS, default="offline")
    p.add_argument("--online-mode", choices=("mean", "argmax"))
    p.add_argument("--out", required=True, help="predictions document to write")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="score predictions and an inferred state")
    p.add_argument("scene")
    with_state(p)
    p.add_argument("--predictions")
    p.add_argument("--literal-relations", action="store_true", help="score relations as the literal recall")
    p.add_argument("--out", required=True, help="report document to write")
    p.add_argument("--summary", help="one-row summary CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", parents=[common], help="functional classes of sources")
    p.add_argument("scene")
    with_state(p)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True, help="clusters document to write")
    p.add_argument("--figure", help="PDF of per-cluster mean feature maps")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("render", parents=[common], help="draw a figure page and optional rasters")
    p.add_argument("scene")
    with_state(p)
    p.add_argument("--kind", choices=FIGURE_KINDS, default="mask")
    p.add_argument("--predictions", help="predictions document (trajectories)")
    p.add_argument("--truth", action="store_true", help="also draw true futures (trajectories)")
    p.add_argument("--source", type=int, default=0, help="source index (arrows, likelihood)")
    p.add_argument("--agent", help="agent id (likelihood)")
    p.add_argument("--lam", type=float, action="append", help="lambda per likelihood page (repeatable)")
    p.add_argument("--cell-size", type=int)
    p.add_argument("--stride", type=int, help="arrow stride")
    p.add_argument("--title")
    p.add_argument("--out", required=True, help="PDF to write")
    p.add_argument("--raster", metavar="PREFIX", help="rasterize every page to PREFIX[.ppm|-NN.ppm]")
    p.add_argument("--graymap", metavar="PATH", help="PGM of the underlying array (mask, arrows, likelihood)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", parents=[common], help="batch suites: toy grid, intent suite, archetypes")
    p.add_argument("--suite", choices=("toy", "intent", "archetypes"), default="toy")
    p.add_argument("--relations", choices=pipeline.RELATION_MODES, default="truth", help="intent suite only")
    p.add_argument("--seeds", type=int, nargs="+", help="archetype seeds")
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True, help="summary CSV (report JSON for the intent suite)")
    p.add_argument("--table", help="|S| x |A| pivot CSV (toy suite)")
    p.set_defaults(func=cmd_sweep)

    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def main(argv: list[str] | None = None) -> int:
    """Entry point for the `intentforge` command."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args)
    try:
        return args.func(args)
    except (InputError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InferenceError, PredictionError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
