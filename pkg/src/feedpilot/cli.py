"""Command line interface: synth, train, eval, run, and activity.

Every command writes its delimited outputs into --out and renders a matching
figure alongside them.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .control import ControlConfig
from .counting import DEFAULT_RHO
from .errors import FeedPilotError
from .pipeline import (
    DEFAULT_GATE,
    DEFAULT_WINDOW,
    evaluate_models,
    format_timing_report,
    harvest_training_pairs,
    run_pipeline,
    timing_report,
    train_models,
)
from .plots import (
    save_activity_figure,
    save_eval_figure,
    save_loss_figure,
    save_scene_figure,
    save_series_figure,
)
from .regression import MODEL_SPECS, TrainConfig, load_model, save_model
from .streams import read_stream, read_truth, write_stream, write_truth
from .synth import ScenarioConfig, synth_scenario
from .texture import load_pyramid, read_pgm


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _frame_file(directory: Path, frame: int, suffix: str) -> Path | None:
    for name in (f"{frame:06d}{suffix}", f"{frame}{suffix}"):
        candidate = directory / name
        if candidate.is_file():
            return candidate
    return None


def _image_source(directory: str):
    root = Path(directory)

    def load(frame: int):
        path = _frame_file(root, frame, ".pgm")
        return read_pgm(path) if path is not None else None

    return load


def _pyramid_source(directory: str):
    root = Path(directory)

    def load(frame: int):
        path = _frame_file(root, frame, ".pyr")
        return load_pyramid(path) if path is not None else None

    return load


def cmd_synth(args) -> int:
    config = ScenarioConfig(
        frames=args.frames,
        seed=args.seed,
        width=args.width,
        height=args.height,
        density=args.density,
        speed=args.speed,
        gravity=args.gravity,
        jitter=args.jitter,
        ripple_drift=args.ripple_drift,
        ripple_dropout=args.ripple_dropout,
        max_tracks=args.max_tracks,
        rho=args.rho,
    )
    scenario = synth_scenario(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_stream(out / "detections.jsonl", scenario.records)
    write_truth(out / "truth.jsonl", scenario.truths)
    save_scene_figure(out / "scene.png", scenario)
    print(
        f"wrote {len(scenario.records)} frames, {scenario.n_tracks} tracks "
        f"to {out / 'detections.jsonl'}"
    )
    return 0


def _train_config(args) -> TrainConfig:
    if args.paper_defaults:
        return TrainConfig(batch_size=args.batch_size, seed=args.seed)
    return TrainConfig(
        iterations=args.iterations,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    config = _train_config(args)
    print(
        f"training config: iterations={config.iterations} "
        f"learning_rate={config.learning_rate} batch_size={config.batch_size} "
        f"seed={config.seed} spec={args.spec} gate={args.gate}"
    )
    records = list(read_stream(args.detections))
    if args.dry_run:
        x_pairs, _ = harvest_training_pairs(records, gate=args.gate)
        print(f"dry run: {len(x_pairs)} training pairs harvested, no training performed")
        return 0
    trained = train_models(records, args.spec, config, gate=args.gate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mx_path = out / f"mx-{args.spec}.model"
    my_path = out / f"my-{args.spec}.model"
    save_model(mx_path, trained.mx.model)
    save_model(my_path, trained.my.model)
    _write_csv(
        out / "loss.csv",
        ["iteration", "mx_loss", "my_loss"],
        zip(
            trained.mx.loss_iterations.tolist(),
            trained.mx.losses.tolist(),
            trained.my.losses.tolist(),
        ),
    )
    save_loss_figure(out / "loss.png", trained.mx.loss_iterations, trained.mx.losses)
    print(
        f"trained on {trained.n_pairs} pairs; final losses "
        f"mx={trained.mx.losses[-1]:.3e} my={trained.my.losses[-1]:.3e}"
    )
    print(f"wrote {mx_path} and {my_path}")
    return 0


def cmd_eval(args) -> int:
    records = list(read_stream(args.detections))
    truth = read_truth(args.truth)
    models = [(name, load_model(mx), load_model(my)) for name, mx, my in args.model]
    evaluation = evaluate_models(records, truth, models, formula=args.eval_formula)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    print(f"{'model':<12} {'N':>6} {'mean(px)':>10} {'std(px)':>10} {'stderr(px)':>11} 95% CI(px)")
    for i, (name, stats) in enumerate(zip(evaluation.names, evaluation.stats)):
        mark = "*" if i == evaluation.best else " "
        print(
            f"{name:<10} {mark} {stats.n:>6} {stats.mean:>10.4f} {stats.std:>10.4f} "
            f"{stats.stderr:>11.4f} [{stats.ci_lower:.4f}, {stats.ci_upper:.4f}]"
        )
        rows.append(
            [
                name,
                stats.n,
                stats.mean,
                stats.std,
                stats.stderr,
                stats.ci_lower,
                stats.ci_upper,
                1 if i == evaluation.best else 0,
            ]
        )
    _write_csv(
        out / "eval.csv",
        ["model", "n", "mean_px", "std_px", "stderr_px", "ci95_lower_px", "ci95_upper_px", "best"],
        rows,
    )
    save_eval_figure(out / "eval.png", evaluation.names, evaluation.stats, evaluation.best)
    print(f"best model: {evaluation.names[evaluation.best]}")
    return 0


def cmd_run(args) -> int:
    records = list(read_stream(args.detections))
    mx = load_model(args.mx) if args.mx else None
    my = load_model(args.my) if args.my else None
    truth = read_truth(args.truth) if args.truth else None
    control = ControlConfig(
        act_on=args.act_on,
        act_off=args.act_off,
        count_max=args.count_max,
        window=args.window,
    )
    result = run_pipeline(
        records,
        mx,
        my,
        predictor=args.predictor,
        truth=truth,
        image_source=_image_source(args.images) if args.images else None,
        rho=args.rho,
        window=args.window,
        control=control,
        toward_ripple=args.count_direction == "toward",
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = result.frames
    _write_csv(
        out / "counts.csv",
        ["frame", "raw_count", "windowed_count"],
        [(f.frame, f.raw_count, f.windowed_count) for f in frames],
    )
    _write_csv(
        out / "activity.csv",
        ["frame", "sigma", "windowed_sigma"],
        [(f.frame, f.sigma, f.windowed_sigma) for f in frames],
    )
    _write_csv(
        out / "decisions.csv",
        ["frame", "feeding", "windowed_count", "windowed_activity", "reason"],
        [
            (
                f.frame,
                1 if f.decision.feeding else 0,
                f.decision.windowed_count,
                f.decision.windowed_activity,
                f.decision.reason,
            )
            for f in frames
        ],
    )
    if args.dump_geometry:
        _write_csv(
            out / "geometry.csv",
            ["frame", "theta", "z", "anchor_x", "anchor_y", "kappa"],
            [
                (
                    f.frame,
                    f.theta,
                    f.z,
                    f.anchor[0] if f.anchor else None,
                    f.anchor[1] if f.anchor else None,
                    ";".join(f"{x!r} {y!r}" for x, y in f.kappa) if f.kappa is not None else "",
                )
                for f in frames
            ],
        )
    report = timing_report(result.frame_ms)
    (out / "timing.txt").write_text(format_timing_report(report), encoding="utf-8")
    save_series_figure(
        out / "series.png",
        [f.frame for f in frames],
        [f.windowed_count for f in frames],
        [f.windowed_sigma for f in frames],
        [f.decision.feeding for f in frames],
    )
    print(f"processed {result.n_frames} frames at {report.mean_fps:.2f} fps (mean per-frame)")
    print(f"outputs in {out}")
    return 0


def cmd_activity(args) -> int:
    records = list(read_stream(args.detections))
    result = run_pipeline(
        records,
        predictor="persistence",
        image_source=_image_source(args.images) if args.images else None,
        pyramid_source=_pyramid_source(args.pyramids) if args.pyramids else None,
        rho=args.rho,
        window=args.window,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = result.frames
    _write_csv(
        out / "activity.csv",
        ["frame", "sigma", "windowed_sigma"],
        [(f.frame, f.sigma, f.windowed_sigma) for f in frames],
    )
    save_activity_figure(
        out / "activity.png",
        [f.frame for f in frames],
        [f.sigma if f.sigma is not None else float("nan") for f in frames],
        [f.windowed_sigma if f.windowed_sigma is not None else float("nan") for f in frames],
    )
    print(f"wrote activity series for {result.n_frames} frames to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedpilot",
        description="Nutriment counting, ripple-activity estimation, and feed control "
        "from per-frame detection streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic detection stream with truth")
    p_synth.add_argument("--frames", type=int, default=418)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--width", type=float, default=1920.0)
    p_synth.add_argument("--height", type=float, default=1080.0)
    p_synth.add_argument("--density", type=float, default=8.0)
    p_synth.add_argument("--speed", type=float, default=30.0)
    p_synth.add_argument("--gravity", type=float, default=0.45)
    p_synth.add_argument("--jitter", type=float, default=0.08)
    p_synth.add_argument("--ripple-drift", type=float, default=0.0)
    p_synth.add_argument("--ripple-dropout", type=float, default=0.0)
    p_synth.add_argument("--max-tracks", type=int, default=None)
    p_synth.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_train = sub.add_parser("train", help="train the two prediction networks from a stream")
    p_train.add_argument("--detections", required=True)
    p_train.add_argument("--spec", choices=sorted(MODEL_SPECS), default="R1")
    p_train.add_argument("--iterations", type=int, default=20_000)
    p_train.add_argument("--learning-rate", type=float, default=3e-3)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--gate", type=float, default=DEFAULT_GATE)
    p_train.add_argument(
        "--paper-defaults",
        action="store_true",
        help="use the reference preset: 1e6 iterations, learning rate 1e-7",
    )
    p_train.add_argument("--dry-run", action="store_true", help="echo config and pair count only")
    p_train.add_argument("--out", default=".")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score model pairs against an annotated stream")
    p_eval.add_argument("--detections", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument(
        "--model",
        nargs=3,
        action="append",
        metavar=("NAME", "MX", "MY"),
        required=True,
        help="label plus the two model files; repeatable",
    )
    p_eval.add_argument("--eval-formula", choices=("euclidean", "literal"), default="euclidean")
    p_eval.add_argument("--out", default=".")
    p_eval.set_defaults(func=cmd_eval)

    p_run = sub.add_parser("run", help="run the full pipeline over a stream")
    p_run.add_argument("--detections", required=True)
    p_run.add_argument("--mx")
    p_run.add_argument("--my")
    p_run.add_argument("--images", help="directory of per-frame PGM images")
    p_run.add_argument("--predictor", choices=("model", "persistence", "truth"), default="model")
    p_run.add_argument("--truth", help="ground-truth sidecar (for --predictor truth)")
    p_run.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p_run.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p_run.add_argument("--act-on", type=float, required=True)
    p_run.add_argument("--act-off", type=float, required=True)
    p_run.add_argument("--count-max", type=int, required=True)
    p_run.add_argument(
        "--count-direction",
        choices=("toward", "away"),
        default="toward",
        help="which line-crossing direction counts (default: toward the ripple)",
    )
    p_run.add_argument("--dump-geometry", action="store_true")
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_act = sub.add_parser("activity", help="compute the ripple-activity series only")
    p_act.add_argument("--detections", required=True)
    group = p_act.add_mutually_exclusive_group(required=True)
    group.add_argument("--images", help="directory of per-frame PGM images")
    group.add_argument("--pyramids", help="directory of per-frame pyramid files")
    p_act.add_argument("--rho", type=float, default=DEFAULT_RHO)
    p_act.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    p_act.add_argument("--out", required=True)
    p_act.set_defaults(func=cmd_activity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and args.predictor == "model" and not (args.mx and args.my):
        parser.error("run with --predictor model requires --mx and --my")
    if args.command == "run" and args.predictor == "truth" and not args.truth:
        parser.error("run with --predictor truth requires --truth")
    try:
        return args.func(args)
    except FeedPilotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
