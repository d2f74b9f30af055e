"""Command-line front end: gen, targets, extract, eval, geometry, report.

Every subcommand that writes to ``--out`` finishes by writing
``manifest.json`` there, which records the flags, seeds and files produced.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from stopline import __version__, kernels
from stopline.association import REPORT_COLUMNS, banded_evaluation, report_to_csv, report_to_json
from stopline.grid_map import GmapFormatError, GridGeometry, read_gmap, read_layers, write_gmap
from stopline.segmenter import SegmenterConfig, segment
from stopline.sensor_geometry import CameraModel, KinematicsSpec, range_table, required_detection_distance
from stopline.sparse_lines import RefineConfig, extract_stop_lines, read_lines, write_lines
from stopline.synth import generate_scene, make_corpus, rasterize_gt
from stopline.target_maps import (
    DEFAULT_D_THRESH,
    direction_map,
    joint_loss,
    load_direction,
    load_distance,
    load_mask,
    load_probability,
    nearest_foreground_map,
    save_direction,
    save_distance,
    save_mask,
    signed_distance_map,
)

log = logging.getLogger("stopline")

MANIFEST = "manifest.json"
_FRAME_RE = re.compile(r"scene_\d+")


class CliError(Exception):
    """Reported as a one-line message with exit status 1."""


def frame_id(path: Path) -> str:
    for part in reversed(path.parts):
        m = _FRAME_RE.search(part)
        if m:
            return m.group(0)
    name = path.name
    return name.split(".")[0]


def _expand(paths, pattern: str, exclude=()) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            found = sorted(q for q in p.rglob(pattern) if not any(q.match(x) for x in exclude))
            out.extend(found)
        elif p.exists():
            out.append(p)
        else:
            raise CliError(f"input not found: {p}")
    if not out:
        raise CliError(f"no inputs matching {pattern!r} in {[str(p) for p in paths]}")
    return out


def _by_frame(paths) -> dict[str, Path]:
    frames: dict[str, Path] = {}
    for p in paths:
        fid = frame_id(p)
        if fid in frames:
            raise CliError(f"two inputs map to frame {fid}: {frames[fid]} and {p}")
        frames[fid] = p
    return dict(sorted(frames.items()))


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _out_dir(args) -> Path:
    if args.out is None:
        raise CliError("--out is required for this subcommand")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}") from None
    return out


def _flags(args) -> dict:
    skip = {"func", "verbose", "parser"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def verify_outputs(paths) -> None:
    """Re-read every output with its reader; exit 0 promises they all parse."""
    for p in map(Path, paths):
        name = p.name
        if name.endswith(".gmap"):
            read_layers(p)
        elif name.endswith("lines.json"):
            read_lines(p)
        elif name.endswith(".json"):
            json.loads(p.read_text())
        elif name.endswith(".csv"):
            list(csv.reader(io.StringIO(p.read_text())))


def write_manifest(out: Path, args, outputs, started: float, **extra) -> None:
    verify_outputs(outputs)
    manifest = {
        "tool": "stopline",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "subcommand": args.command,
        "flags": _flags(args),
        "seeds": {"seed": args.seed},
        "outputs": sorted(str(Path(p).relative_to(out)) for p in outputs),
        **extra,
        "duration_s": round(time.perf_counter() - started, 3),
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, default=str) + "\n")


def _geometry(args) -> GridGeometry:
    ego = (args.ego_row, args.ego_col)
    return GridGeometry(args.height, args.width, args.resolution, ego, args.heading)


def _refine(args) -> RefineConfig:
    return RefineConfig(args.merge_dist, args.merge_angle, args.n_interp, args.min_cluster)


# --- subcommands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.scenes < 1:
        raise CliError("--scenes must be >= 1")
    started = time.perf_counter()
    out = _out_dir(args)
    geom = _geometry(args)
    overrides = {
        "include_crosswalks": args.crosswalks,
        "occlusion_blobs": args.occlusion_blobs,
        "marking_erase_fraction": args.erase_fraction,
        "noise_sigma": args.noise_sigma,
    }
    if args.lanes is not None:
        overrides["lanes_per_direction"] = args.lanes
    try:
        specs = make_corpus(args.scenes, args.seed, geom, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    def one(item):
        i, spec = item
        d = out / f"scene_{i:06d}"
        d.mkdir(exist_ok=True)
        g, gt = generate_scene(spec, geom)
        write_gmap(d / "scene.gmap", g)
        write_lines(d / "gt_lines.json", gt)
        save_mask(d / "gt_mask.gmap", rasterize_gt(gt, geom, args.gt_thickness))
        return [d / "scene.gmap", d / "gt_lines.json", d / "gt_mask.gmap"]

    try:
        written = [p for ps in _pmap(one, list(enumerate(specs)), args.threads) for p in ps]
    except ValueError as exc:
        raise CliError(str(exc)) from None
    grid = {"height": geom.height, "width": geom.width, "resolution": geom.resolution,
            "ego_cell": list(geom.ego_cell), "ego_heading": geom.ego_heading}
    write_manifest(out, args, written, started, grid=grid, scenes=[s.to_dict() for s in specs])
    log.info("wrote %d scenes to %s", len(specs), out)
    return 0


def cmd_targets(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    masks = _by_frame(_expand(args.inputs, "*mask*.gmap"))

    def one(item):
        fid, path = item
        m = load_mask(path)
        fm = nearest_foreground_map(m)
        dist = signed_distance_map(m, args.d_thresh)
        dirm = direction_map(m, args.d_thresh, feature_map=fm)
        pd, pe = out / f"{fid}.distance.gmap", out / f"{fid}.direction.gmap"
        save_distance(pd, dist, m.geometry)
        save_direction(pe, dirm, m.geometry)
        return [pd, pe]

    written = [p for ps in _pmap(one, list(masks.items()), args.threads) for p in ps]
    extra = {"inputs": [str(p) for p in masks.values()]}
    if args.loss:
        if len(masks) != 1:
            raise CliError("--loss evaluates one frame; pass exactly one mask")
        if not (args.pred_seg and args.pred_dist and args.pred_dir):
            raise CliError("--loss needs --pred-seg, --pred-dist and --pred-dir")
        (fid, path), = masks.items()
        m = load_mask(path)
        # score against the targets as stored on disk (float32)
        gt_dist = load_distance(out / f"{fid}.distance.gmap", args.d_thresh)
        gt_dir = load_direction(out / f"{fid}.direction.gmap", args.d_thresh)
        loss = joint_loss(
            load_probability(args.pred_seg),
            load_distance(args.pred_dist, args.d_thresh),
            load_direction(args.pred_dir, args.d_thresh),
            m,
            gt_dist,
            gt_dir,
            class_weights=args.class_weights,
        )
        text = json.dumps(loss.__dict__, indent=1) + "\n"
        (out / "loss.json").write_text(text)
        written.append(out / "loss.json")
        sys.stdout.write(text)
    write_manifest(out, args, written, started, **extra)
    return 0


def cmd_extract(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    cfg = _refine(args)
    if bool(args.masks) == bool(args.gridmaps):
        raise CliError("pass exactly one of --masks or --gridmaps")
    if args.masks:
        frames = _by_frame(_expand(args.masks, "*mask*.gmap"))
    else:
        frames = _by_frame(_expand(args.gridmaps, "*.gmap", exclude=("*mask*", "*.distance.gmap", "*.direction.gmap")))
    seg_cfg = SegmenterConfig(
        args.marking_threshold, args.max_angle, args.min_bar_length, (args.min_depth, args.max_depth)
    )

    def one(item):
        fid, path = item
        written = []
        if args.masks:
            mask = load_mask(path)
        else:
            mask = segment(read_gmap(path), seg_cfg)
            if args.save_masks:
                save_mask(out / f"{fid}.mask.gmap", mask)
                written.append(out / f"{fid}.mask.gmap")
        dest = out / f"{fid}.lines.json"
        write_lines(dest, extract_stop_lines(mask, cfg))
        written.append(dest)
        return written

    written = [p for ps in _pmap(one, list(frames.items()), args.threads) for p in ps]
    write_manifest(out, args, written, started, inputs=[str(p) for p in frames.values()])
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    out = _out_dir(args)
    preds = _by_frame(_expand(args.pred, "*.lines.json"))
    gts = _by_frame(_expand(args.gt, "gt_lines.json"))
    missing_gt = sorted(set(preds) - set(gts))
    missing_pred = sorted(set(gts) - set(preds))
    if missing_gt or missing_pred:
        raise CliError(f"unpaired frames: no ground truth for {missing_gt}, no prediction for {missing_pred}")
    frames = [(read_lines(preds[f]), read_lines(gts[f])) for f in gts]
    report = banded_evaluation(frames, args.a_thresh, args.n_interp)
    (out / "report.csv").write_text(report_to_csv(report))
    (out / "report.json").write_text(report_to_json(report))
    write_manifest(out, args, [out / "report.csv", out / "report.json"], started, frames=list(gts))
    if args.verbose:
        sys.stdout.write(report_to_csv(report))
    return 0


def _positive(name: str, value: float, allow_zero: bool = False) -> None:
    if value < 0 or (value == 0 and not allow_zero):
        raise argparse.ArgumentTypeError(f"{name} must be {'non-negative' if allow_zero else 'positive'}")


def cmd_geometry(args) -> int:
    started = time.perf_counter()
    try:
        _positive("--speed-mps", args.speed_mps, allow_zero=True)
        _positive("--decel", args.decel)
        _positive("--latency", args.latency, allow_zero=True)
        _positive("--focal-px", args.focal_px)
        _positive("--mount-height", args.mount_height)
        _positive("--line-depth", args.line_depth)
        for d in args.distances:
            _positive("--distances", d)
    except argparse.ArgumentTypeError as exc:
        args.parser.error(str(exc))
    cam = CameraModel(args.focal_px, args.mount_height)
    kin = KinematicsSpec(args.speed_mps, args.decel, args.latency)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["distance_m", "pixels"])
    for d, px in range_table(cam, args.line_depth, args.distances):
        w.writerow([repr(d), f"{px:.6f}"])
    buf.write(f"\nrequired_detection_distance_m,{required_detection_distance(kin):.3f}\n")
    sys.stdout.write(buf.getvalue())
    if args.out is not None:
        out = _out_dir(args)
        (out / "geometry.csv").write_text(buf.getvalue())
        write_manifest(out, args, [out / "geometry.csv"], started)
    return 0


def cmd_report(args) -> int:
    started = time.perf_counter()
    paths = _expand(args.inputs, "report.json")
    names = [p.parent.name or str(p) for p in paths]
    if len(set(names)) != len(names):
        names = [str(p) for p in paths]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("run",) + REPORT_COLUMNS)
    for name, p in zip(names, paths):
        try:
            rows = json.loads(p.read_text())["rows"]
        except (ValueError, KeyError) as exc:
            raise CliError(f"{p}: not a report.json ({exc})") from None
        for row in rows:
            w.writerow([name] + ["" if row[c] is None else row[c] for c in REPORT_COLUMNS])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
        return 0
    out = _out_dir(args)
    (out / "comparison.csv").write_text(buf.getvalue())
    write_manifest(out, args, [out / "comparison.csv"], started, inputs=[str(p) for p in paths])
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="frames processed in parallel")
    common.add_argument("--verbose", "-v", action="store_true")

    p = argparse.ArgumentParser(prog="stopline", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stopline {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic intersection scenes")
    g.add_argument("--scenes", type=int, required=True)
    g.add_argument("--lanes", type=int, default=None, help="lanes per direction (default: sampled 1-2)")
    g.add_argument("--crosswalks", action="store_true")
    g.add_argument("--occlusion-blobs", type=int, default=0)
    g.add_argument("--erase-fraction", type=float, default=0.0)
    g.add_argument("--noise-sigma", type=float, default=0.0)
    g.add_argument("--gt-thickness", type=int, default=2, help="ground-truth mask line thickness, cells")
    g.add_argument("--height", type=int, default=192)
    g.add_argument("--width", type=int, default=192)
    g.add_argument("--resolution", type=float, default=0.26)
    g.add_argument("--ego-row", type=int, default=160)
    g.add_argument("--ego-col", type=int, default=96)
    g.add_argument("--heading", type=float, default=0.0, help="ego heading, radians")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("targets", parents=[common], help="distance and direction targets from masks")
    t.add_argument("inputs", nargs="+", help="mask files or directories")
    t.add_argument("--d-thresh", type=int, default=DEFAULT_D_THRESH)
    t.add_argument("--loss", action="store_true", help="score a prediction triple against the targets")
    t.add_argument("--pred-seg")
    t.add_argument("--pred-dist")
    t.add_argument("--pred-dir")
    t.add_argument("--class-weights", type=float, nargs=2, metavar=("W_BG", "W_FG"))
    t.set_defaults(func=cmd_targets)

    e = sub.add_parser("extract", parents=[common], help="sparse stop lines from masks or grid maps")
    e.add_argument("--masks", nargs="+")
    e.add_argument("--gridmaps", nargs="+", help="segment grid maps with the heuristic baseline first")
    e.add_argument("--save-masks", action="store_true")
    e.add_argument("--min-cluster", type=int, default=3)
    e.add_argument("--merge-dist", type=float, default=0.3)
    e.add_argument("--merge-angle", type=float, default=8.0)
    e.add_argument("--n-interp", type=int, default=10)
    e.add_argument("--marking-threshold", type=float, default=0.5)
    e.add_argument("--max-angle", type=float, default=20.0)
    e.add_argument("--min-bar-length", type=float, default=1.5)
    e.add_argument("--min-depth", type=float, default=0.2)
    e.add_argument("--max-depth", type=float, default=0.9)
    e.set_defaults(func=cmd_extract)

    v = sub.add_parser("eval", parents=[common], help="banded association metrics")
    v.add_argument("--pred", nargs="+", required=True)
    v.add_argument("--gt", nargs="+", required=True)
    v.add_argument("--a-thresh", type=float, default=8.0)
    v.add_argument("--n-interp", type=int, default=10)
    v.set_defaults(func=cmd_eval)

    m = sub.add_parser("geometry", parents=[common], help="camera range table and stopping distance")
    m.add_argument("--speed-mps", type=float, default=15.6464)
    m.add_argument("--decel", type=float, default=3.0)
    m.add_argument("--latency", type=float, default=0.8)
    m.add_argument("--focal-px", type=float, default=2000.0)
    m.add_argument("--mount-height", type=float, default=1.5)
    m.add_argument("--line-depth", type=float, default=0.3)
    m.add_argument("--distances", type=float, nargs="+", default=[5.0 * k for k in range(1, 11)])
    m.set_defaults(func=cmd_geometry, parser=m)

    r = sub.add_parser("report", parents=[common], help="merge report.json files into one CSV")
    r.add_argument("inputs", nargs="+")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (CliError, GmapFormatError, OSError, ValueError) as exc:
        print(f"stopline {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
