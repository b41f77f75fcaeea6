"""strainveil command line interface.

Four subcommands mirror the pipeline stages: `suppress` runs the whole
chain, `strainmap` stops after strain export, `eval` turns detector
intensity CSVs into outcome tables and plots, `synth` generates
ground-truth test sequences. Every run drops a manifest.json describing
inputs, configuration and outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import re
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from strainveil import __version__
from strainveil.align import align_sequence, default_template, parse_landmarks, parse_template, write_landmarks
from strainveil.errors import FormatError, InputError, PipelineError
from strainveil.evaluate import evaluate_corpus, load_intensity_csv, roc_curve, roc_samples
from strainveil.flow import FlowParams, compute_flow_sequence, write_flow
from strainveil.frame_io import read_frame, read_frame_dir, read_y4m, to_luma, write_frame_dir, write_pnm
from strainveil.report import emit_curves, write_report, write_roc
from strainveil.strain import strain_sequence, write_strain
from strainveil.suppress import SuppressionConfig, parse_config, suppress_sequence
from strainveil.synth import DEFORM_KINDS, grid_landmarks, make_texture, synth_sequence


@contextmanager
def _stage(timings: dict, name: str):
    t0 = time.perf_counter()
    yield
    timings[name] = round((time.perf_counter() - t0) * 1000.0, 3)


def _write_manifest(out_dir: Path, command: str, inputs: dict, config: dict,
                    timings: dict, outputs: list[Path]) -> Path:
    path = out_dir / "manifest.json"
    rel = sorted(os.path.relpath(p, out_dir) for p in outputs)
    manifest = {
        "tool": "strainveil",
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "config": config,
        "timings_ms": timings,
        "outputs": rel + ["manifest.json"],
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _detect_format(path_str: str) -> str:
    suffix = Path(path_str).suffix.lower().lstrip(".")
    if suffix in ("pgm", "ppm", "png", "y4m"):
        return suffix
    p = Path(path_str)
    if p.is_dir():
        for fmt in ("pgm", "ppm", "png"):
            if any(p.glob(f"*.{fmt}")):
                return fmt
    raise InputError(f"cannot determine frame format under '{path_str}'")


def _read_frames(path_str: str, fps: float):
    fmt = _detect_format(path_str)
    if fmt == "y4m":
        return read_y4m(path_str)
    return read_frame_dir(path_str, fmt=fmt, fps=fps)


def _load_config(args) -> tuple[SuppressionConfig, FlowParams]:
    if args.config:
        return parse_config(args.config)
    return SuppressionConfig(), FlowParams()


def _config_snapshot(cfg: SuppressionConfig, params: FlowParams, **extra) -> dict:
    snap = {**dataclasses.asdict(cfg), **dataclasses.asdict(params), **extra}
    return snap


def _load_aligned(args, timings):
    with _stage(timings, "read"):
        seq = _read_frames(args.frames, args.fps)
        landmark_sets = parse_landmarks(args.landmarks)
    with _stage(timings, "align"):
        if args.template:
            template = parse_template(args.template)
        else:
            template = default_template(landmark_sets[0], args.crop_size, args.crop_size)
        aligned = align_sequence(seq, landmark_sets, template, args.crop_size, args.crop_size)
    return aligned


def cmd_suppress(args) -> int:
    timings: dict = {}
    out_dir = Path(args.out)
    cfg, params = _load_config(args)
    aligned = _load_aligned(args, timings)
    with _stage(timings, "suppress"):
        result, strains, masks = suppress_sequence(aligned, cfg, params, threads=args.threads)
    outputs: list[Path] = []
    with _stage(timings, "write"):
        fmt = "pgm" if result.channels == 1 else "ppm"
        outputs += write_frame_dir(result, out_dir / "suppressed", fmt=fmt)
        if args.dump_strain:
            (out_dir / "strain").mkdir(parents=True, exist_ok=True)
            for k, s in enumerate(strains):
                p = out_dir / "strain" / f"strain_{k + 1:04d}.pgm"
                write_pnm(s.normalized, p)
                outputs.append(p)
        if args.dump_masks:
            (out_dir / "masks").mkdir(parents=True, exist_ok=True)
            for k, m in enumerate(masks):
                p = out_dir / "masks" / f"mask_{k + 1:04d}.pgm"
                write_pnm(m.astype(np.uint8) * 255, p)
                outputs.append(p)
    inputs = {"frames": args.frames, "landmarks": args.landmarks,
              "config": args.config, "template": args.template}
    snap = _config_snapshot(cfg, params, threads=args.threads, crop_size=args.crop_size)
    _write_manifest(out_dir, "suppress", inputs, snap, timings, outputs)
    print(f"wrote {len(result)} suppressed frames to {out_dir / 'suppressed'}")
    return 0


def cmd_strainmap(args) -> int:
    timings: dict = {}
    out_dir = Path(args.out)
    cfg, params = _load_config(args)
    aligned = _load_aligned(args, timings)
    with _stage(timings, "flow"):
        luma = np.stack([to_luma(aligned[i]) for i in range(len(aligned))])
        flows = compute_flow_sequence(luma, params, threads=args.threads)
    with _stage(timings, "strain"):
        strains = strain_sequence(flows, scope=cfg.normalize_scope)
    outputs: list[Path] = []
    with _stage(timings, "write"):
        (out_dir / "strain").mkdir(parents=True, exist_ok=True)
        for k, s in enumerate(strains):
            png_p = out_dir / "strain" / f"strain_{k + 1:04d}.pgm"
            raw_p = out_dir / "strain" / f"strain_{k + 1:04d}.svsm"
            write_pnm(s.normalized, png_p)
            write_strain(s, raw_p)
            outputs += [png_p, raw_p]
    inputs = {"frames": args.frames, "landmarks": args.landmarks,
              "config": args.config, "template": args.template}
    snap = _config_snapshot(cfg, params, threads=args.threads, crop_size=args.crop_size)
    _write_manifest(out_dir, "strainmap", inputs, snap, timings, outputs)
    print(f"wrote {len(strains)} strain maps to {out_dir / 'strain'}")
    return 0


def _safe_name(video_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", video_id)


def cmd_eval(args) -> int:
    timings: dict = {}
    out_dir = Path(args.out)
    with _stage(timings, "read"):
        before = load_intensity_csv(args.before)
        after = load_intensity_csv(args.after)
    with _stage(timings, "classify"):
        report = evaluate_corpus(before, after, noise_floor=args.noise_floor)
    outputs: list[Path] = []
    with _stage(timings, "write"):
        outputs += write_report(report, out_dir, args.noise_floor)
        after_by_id = {s.video_id: s for s in after}
        for b in before:
            outputs += emit_curves(b, after_by_id[b.video_id],
                                   out_dir / "curves" / _safe_name(b.video_id))
        curves = {}
        for name, series in (("before", before), ("after", after)):
            samples = roc_samples(series)
            if samples:
                try:
                    curves[name] = roc_curve(samples)
                except ValueError:
                    pass  # single-class labels, nothing to sweep
        if curves:
            outputs += write_roc(curves, out_dir)
        else:
            print("roc skipped: no event windows or single-class labels")
    inputs = {"before": args.before, "after": args.after}
    snap = {"noise_floor": args.noise_floor}
    _write_manifest(out_dir, "eval", inputs, snap, timings, outputs)
    for case, pct_videos, mean_change in report.rows:
        change = "-" if mean_change is None else f"{round(mean_change)}%"
        print(f"{case.value:<10} {pct_videos:>3}%  {change}")
    return 0


def cmd_synth(args) -> int:
    timings: dict = {}
    out_dir = Path(args.out)
    with _stage(timings, "generate"):
        if args.base:
            base = read_frame(args.base)
            if base.ndim == 3:
                base = to_luma(base)
        else:
            base = make_texture(args.size, args.size, seed=args.seed)
        try:
            seq, ground_truth = synth_sequence(
                base, args.deform, args.amplitude, args.frames, fps=args.fps
            )
        except ValueError as e:
            raise InputError(str(e)) from e
    outputs: list[Path] = []
    with _stage(timings, "write"):
        outputs += write_frame_dir(seq, out_dir / "frames", fmt="pgm")
        (out_dir / "gt_flow").mkdir(parents=True, exist_ok=True)
        for k, field in enumerate(ground_truth):
            p = out_dir / "gt_flow" / f"gt_flow_{k + 1:04d}.svfl"
            write_flow(field, p)
            outputs.append(p)
        lm_path = out_dir / "landmarks.csv"
        grid = grid_landmarks(seq.width, seq.height)
        write_landmarks([grid] * len(seq), lm_path)
        outputs.append(lm_path)
    inputs = {"base": args.base}
    snap = {"deform": args.deform, "amplitude": args.amplitude, "frames": args.frames,
            "size": args.size, "seed": args.seed, "fps": args.fps}
    _write_manifest(out_dir, "synth", inputs, snap, timings, outputs)
    print(f"wrote {len(seq)} frames + {len(ground_truth)} ground-truth flows to {out_dir}")
    return 0


def _add_pipeline_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--frames", required=True,
                    help="frame directory, printf pattern, or .y4m file")
    sp.add_argument("--landmarks", required=True, help="per-frame landmark CSV")
    sp.add_argument("--config", help="key = value config file")
    sp.add_argument("--template", help="template landmark CSV (default: derived from frame 0)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--crop-size", type=int, default=256, help="aligned crop side (default 256)")
    sp.add_argument("--fps", type=float, default=30.0, help="frame rate for image sequences")
    sp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                    help="worker threads for flow (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="strainveil",
                                description="optical-strain facial expression suppression")
    p.add_argument("--version", action="version", version=f"strainveil {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("suppress", help="run the full suppression pipeline")
    _add_pipeline_args(sp)
    sp.add_argument("--dump-strain", action="store_true", help="write strain map PGMs")
    sp.add_argument("--dump-masks", action="store_true", help="write replacement mask PGMs")
    sp.set_defaults(func=cmd_suppress)

    sp = sub.add_parser("strainmap", help="stop after strain map export")
    _add_pipeline_args(sp)
    sp.set_defaults(func=cmd_strainmap)

    sp = sub.add_parser("eval", help="classify before/after intensity CSVs")
    sp.add_argument("--before", required=True, help="intensity CSV before suppression")
    sp.add_argument("--after", required=True, help="intensity CSV after suppression")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--noise-floor", type=float, default=1.0,
                    help="intensity at or below which the expression counts as removed")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="generate a synthetic ground-truth sequence")
    sp.add_argument("--base", help="base frame image (default: generated texture)")
    sp.add_argument("--size", type=int, default=128, help="generated texture side (default 128)")
    sp.add_argument("--deform", choices=DEFORM_KINDS, default="bulge")
    sp.add_argument("--amplitude", type=float, default=4.0, help="peak displacement in px (max 8)")
    sp.add_argument("--frames", type=int, default=20)
    sp.add_argument("--seed", type=int, default=42, help="texture RNG seed")
    sp.add_argument("--fps", type=float, default=30.0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, PipelineError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
