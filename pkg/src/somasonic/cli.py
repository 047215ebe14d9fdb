"""Operator command line: modes, render, spectrogram, serve, eval.

Report-producing subcommands write a figure next to every delimited
output. All subcommands except serve are pure functions of their inputs,
flags, and --seed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis, evaluate, plotting, scene, server, wavio
from .errors import SomasonicError


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SomasonicError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somasonic",
        description="Physically-informed sonification of anatomical meshes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_modes = sub.add_parser("modes", help="print per-structure retained mode table")
    p_modes.add_argument("scene", help="scene config JSON")
    p_modes.add_argument("-o", "--output", help="write CSV (+ PNG figure) here")
    p_modes.add_argument("--cache-dir", default=None)
    p_modes.set_defaults(func=_cmd_modes)

    p_render = sub.add_parser("render", help="render an event script offline to WAV")
    p_render.add_argument("scene")
    p_render.add_argument("events", help="JSON-lines message script (trial log format)")
    p_render.add_argument("-o", "--output", required=True, help="output WAV path")
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--tail", type=float, default=1.0, help="seconds after last event")
    p_render.add_argument("--pcm16", action="store_true", help="write 16-bit PCM instead of float32")
    p_render.add_argument("--cache-dir", default=None)
    p_render.set_defaults(func=_cmd_render)

    p_spec = sub.add_parser("spectrogram", help="mel spectrogram of a WAV file")
    p_spec.add_argument("input", help="input WAV")
    p_spec.add_argument("-o", "--output", required=True, help="output CSV (PNG written alongside)")
    p_spec.add_argument("--fft", type=int, default=analysis.DEFAULT_FFT)
    p_spec.add_argument("--hop", type=int, default=analysis.DEFAULT_HOP)
    p_spec.add_argument("--mels", type=int, default=analysis.DEFAULT_N_MELS)
    p_spec.add_argument("--fmin", type=float, default=analysis.DEFAULT_F_MIN)
    p_spec.add_argument("--fmax", type=float, default=analysis.DEFAULT_F_MAX)
    p_spec.set_defaults(func=_cmd_spectrogram)

    p_serve = sub.add_parser("serve", help="host a live session")
    p_serve.add_argument("scene")
    p_serve.add_argument("--udp", type=int, default=9000, help="OSC ingest port")
    p_serve.add_argument("--ws", type=int, default=8765, help="WebSocket stream port")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--log", default=None, help="trial log JSONL path")
    p_serve.add_argument("--cache-dir", default=None)
    p_serve.set_defaults(func=_cmd_serve)

    p_eval = sub.add_parser("eval", help="score trial logs against ground truth")
    p_eval.add_argument("logs", nargs="+", help="trial log JSONL files")
    p_eval.add_argument("--scene", required=True, help="scene config with ground_truth_id")
    p_eval.add_argument("-o", "--output", required=True, help="summary CSV (PNG alongside)")
    p_eval.add_argument("--cell-size", type=float, default=None)
    p_eval.add_argument("--per-trial", default=None, help="optional per-trial JSON output")
    p_eval.add_argument("--mark-outliers", action="store_true")
    p_eval.set_defaults(func=_cmd_eval)

    return parser


def _load_scene(path, cache_dir):
    config = scene.load_scene_config(path)
    structures = scene.load_scene(config, cache_dir=cache_dir)
    return config, structures


def _cmd_modes(args) -> int:
    config, structures = _load_scene(args.scene, args.cache_dir)
    table = {}
    print(f"{'structure':<20} {'tissue':<18} {'modes':>5}  frequencies (Hz)")
    for sid, s in structures.items():
        hz = s.model.frequencies_hz
        table[sid] = hz
        head = ", ".join(f"{f:.1f}" for f in hz[:6])
        more = " ..." if len(hz) > 6 else ""
        print(f"{sid:<20} {s.tissue.name:<18} {len(hz):>5}  {head}{more}")
    if args.output:
        out = Path(args.output)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["schema", "structure", "tissue", "mode", "frequency_hz", "damping_ratio"])
            for sid, s in structures.items():
                for i, (f, z) in enumerate(zip(s.model.frequencies_hz, s.model.damping_ratios)):
                    writer.writerow(["somasonic.modes.v1", sid, s.tissue.name, i, f"{f:.9g}", f"{z:.9g}"])
        plotting.save_figure(plotting.modes_figure(table), out.with_suffix(".png"))
        print(f"wrote {out} and {out.with_suffix('.png')}")
    return 0


def _cmd_render(args) -> int:
    config = scene.load_scene_config(args.scene)
    records = server.read_log(args.events)
    audio = server.replay_records(
        config, records, tail=args.tail, seed=args.seed, cache_dir=args.cache_dir
    )
    fmt = "pcm16" if args.pcm16 else "float32"
    wavio.write_wav(args.output, audio, config.audio.sample_rate, fmt=fmt)
    print(f"wrote {args.output}: {audio.shape[0]} samples, {audio.shape[1]} channels")
    return 0


def _cmd_spectrogram(args) -> int:
    samples, sr = wavio.read_wav(args.input)
    mono = samples.mean(axis=1)
    cfg = analysis.MelConfig(
        sample_rate=sr,
        fft_size=args.fft,
        hop=args.hop,
        n_mels=args.mels,
        f_min=args.fmin,
        f_max=min(args.fmax, sr / 2),
    )
    spec = analysis.mel_spectrogram(mono, cfg)
    out = Path(args.output)
    analysis.export_csv(spec, out)
    fig = plotting.spectrogram_figure(spec.values, sr, cfg.hop, title=Path(args.input).name)
    plotting.save_figure(fig, out.with_suffix(".png"))
    centroid = analysis.spectral_centroid(mono, sr) if np.any(mono) else float("nan")
    print(f"wrote {out} and {out.with_suffix('.png')} (centroid {centroid:.1f} Hz)")
    return 0


def _cmd_serve(args) -> int:
    config = scene.load_scene_config(args.scene)
    print(f"serving {args.scene}: udp={args.udp} ws={args.ws} host={args.host}")
    server.serve_forever(
        config,
        udp_port=args.udp,
        ws_port=args.ws,
        host=args.host,
        seed=args.seed,
        log_path=args.log,
        cache_dir=args.cache_dir,
        scene_path=str(args.scene),
    )
    return 0


def _cmd_eval(args) -> int:
    config = scene.load_scene_config(args.scene)
    if config.ground_truth_id is None:
        print("error: scene config has no ground_truth_id", file=sys.stderr)
        return 1
    structures = scene.load_scene(config)
    gt = structures[config.ground_truth_id].mesh
    scores = []
    for log_path in args.logs:
        records = server.read_log(log_path)
        for trial in evaluate.extract_trials(records, default_id=Path(log_path).stem):
            scores.append(
                evaluate.score_trial(
                    trial.trial_id,
                    trial.condition,
                    trial.markers,
                    gt,
                    trial.task_time,
                    cell_size=args.cell_size,
                )
            )
    summaries = evaluate.aggregate_trials(scores, mark_outliers=args.mark_outliers)
    out = Path(args.output)
    evaluate.write_summary_csv(summaries, out)
    plotting.save_figure(plotting.eval_summary_figure(summaries), out.with_suffix(".png"))
    if args.per_trial:
        evaluate.write_per_trial_json(scores, args.per_trial)
    for s in summaries:
        print(
            f"{s.condition}: n={s.n} dice={s.dice_mean:.3f}+-{s.dice_sd:.3f} "
            f"time={s.time_mean:.1f}+-{s.time_sd:.1f}s"
        )
    print(f"wrote {out} and {out.with_suffix('.png')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
