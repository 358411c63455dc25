"""Batch command-line front end.

Subcommands:

* ``tile``: cut every manifest scene into sliding-window tiles and emit
  a tile-level manifest next to the tile PNGs.
* ``augment``: generate n augmented image/label pairs from the train
  split, sample i drawn from RNG stream (seed, i).
* ``preview``: render the eight-row pipeline panel for one seed.
* ``eval``: score predicted label rasters against a manifest split.

Every command is deterministic given its flags, seed, and inputs:
output PNGs and report files are byte-identical across reruns and
worker counts (timing is printed to stdout only, never written into
artifacts). Worker processes each own their sample's RNG stream, so
parallel schedules cannot reorder randomness.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .augment import (
    AugmentConfig,
    augment_sample,
    load_augment_config,
    sample_stream,
)
from .dataset import (
    Manifest,
    ManifestEntry,
    SampleReader,
    TileSpec,
    format_manifest,
    load_manifest,
    tile_grid,
)
from .errors import (
    ConfigError,
    EmptySplitError,
    EvaluationError,
    PatchMosaicError,
    SizeError,
)
from .metrics import (
    ConfusionMatrix,
    confusion,
    iou_per_class,
    miou,
    pixel_accuracy,
    zero_confusion,
)
from .preview import render_preview
from .raster import (
    ColorMap,
    color_from_label,
    label_from_color,
    load_colormap,
    read_image,
    write_image,
)

WORKERS_ENV = "PATCHMOSAIC_WORKERS"

REPORT_NAME = "report.txt"
TILE_MANIFEST_NAME = "manifest.txt"
TILE_COLORMAP_NAME = "colormap.txt"


# ---------------------------------------------------------------------------
# Run reports
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    """What a command did: settings snapshot plus outcome counts.

    ``wall_time`` and ``stage_times`` are informational and are never
    written into artifacts, keeping reruns byte-identical.
    """

    command: str
    seed: int | None = None
    config: dict[str, object] = field(default_factory=dict)
    inputs: int = 0
    outputs: int = 0
    skipped: int = 0
    counters: dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0
    stage_times: dict[str, float] = field(default_factory=dict)

    def lines(self, include_timing: bool = False) -> list[str]:
        out = [f"command={self.command}"]
        if self.seed is not None:
            out.append(f"seed={self.seed}")
        for key in sorted(self.config):
            out.append(f"config.{key}={self.config[key]}")
        out.append(f"inputs={self.inputs}")
        out.append(f"outputs={self.outputs}")
        out.append(f"skipped={self.skipped}")
        for key in sorted(self.counters):
            out.append(f"{key}={self.counters[key]}")
        if include_timing:
            out.append(f"wall_time_s={self.wall_time:.3f}")
            for key in sorted(self.stage_times):
                out.append(f"stage.{key}_s={self.stage_times[key]:.3f}")
        return out

    def render(self, include_timing: bool = False) -> str:
        return "\n".join(self.lines(include_timing=include_timing)) + "\n"


def _write_report(report: RunReport, out_dir: Path) -> None:
    (out_dir / REPORT_NAME).write_text(report.render(), encoding="utf-8")


# ---------------------------------------------------------------------------
# Shared argument plumbing
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _bool_flag(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _pair(values: list[int], what: str) -> tuple[int, int]:
    if len(values) == 1:
        return (values[0], values[0])
    if len(values) == 2:
        return (values[0], values[1])
    raise ConfigError(f"{what} takes one or two integers, got {len(values)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchmosaic",
        description="Deterministic mosaic + clustered-patch-mix augmentation for "
        "paired image/label rasters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_workers(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--workers",
            type=_positive_int,
            default=None,
            help=f"worker process count (default: ${WORKERS_ENV} or 1)",
        )

    def add_overrides(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="augmentation config file")
        p.add_argument("--p-mosaic", type=float, default=None, dest="p_mosaic")
        p.add_argument(
            "--p-cpm",
            type=float,
            default=None,
            dest="p_patch_mix",
            help="probability of the clustered patch-mix phase",
        )
        p.add_argument(
            "--out-size",
            type=_positive_int,
            nargs="+",
            default=None,
            dest="out_size",
            help="output size as W H (one value means square)",
        )
        p.add_argument("--k-max", type=_positive_int, default=None, dest="k_max")
        p.add_argument("--min-area", type=_positive_int, default=None, dest="min_area")
        p.add_argument(
            "--connectivity", type=int, choices=(4, 8), default=None
        )
        p.add_argument(
            "--patch-classes",
            type=int,
            nargs="+",
            default=None,
            dest="patch_classes",
            help="class indices eligible as patch donors",
        )
        p.add_argument(
            "--enable-flips", type=_bool_flag, default=None, dest="enable_flips"
        )
        p.add_argument(
            "--enable-quarter-rotations",
            type=_bool_flag,
            default=None,
            dest="enable_quarter_rotations",
        )

    p_tile = sub.add_parser("tile", help="cut scenes into sliding-window tiles")
    p_tile.add_argument("--manifest", type=Path, required=True)
    p_tile.add_argument("--out", type=Path, required=True, help="output directory")
    p_tile.add_argument(
        "--window", type=_positive_int, nargs="+", required=True, help="tile size as W H"
    )
    p_tile.add_argument(
        "--stride",
        type=_positive_int,
        nargs="+",
        default=None,
        help="window stride as X Y (default: the window size)",
    )
    add_workers(p_tile)
    p_tile.set_defaults(func=cmd_tile)

    p_aug = sub.add_parser("augment", help="generate augmented training pairs")
    p_aug.add_argument("--manifest", type=Path, required=True)
    p_aug.add_argument("--out", type=Path, required=True, help="output directory")
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument(
        "--n-samples", type=_positive_int, required=True, dest="n_samples"
    )
    add_overrides(p_aug)
    add_workers(p_aug)
    p_aug.set_defaults(func=cmd_augment)

    p_prev = sub.add_parser("preview", help="render the 8-row pipeline panel")
    p_prev.add_argument("--manifest", type=Path, required=True)
    p_prev.add_argument("--out", type=Path, required=True, help="output PNG path")
    p_prev.add_argument("--seed", type=int, default=0)
    add_overrides(p_prev)
    p_prev.set_defaults(func=cmd_preview)

    p_eval = sub.add_parser("eval", help="score predicted label rasters")
    p_eval.add_argument("--manifest", type=Path, required=True)
    p_eval.add_argument(
        "--pred-dir",
        type=Path,
        required=True,
        dest="pred_dir",
        help="directory of predicted color label PNGs, named like the "
        "ground-truth label files",
    )
    p_eval.add_argument(
        "--colormap",
        type=Path,
        default=None,
        help="colormap file (default: the manifest's)",
    )
    p_eval.add_argument("--split", choices=("train", "test"), default="test")
    add_workers(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    return parser


def resolve_workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {value}")
    return value


def resolve_config(args: argparse.Namespace) -> AugmentConfig:
    """Config file (if any) with CLI flags layered on top."""
    cfg = load_augment_config(args.config) if args.config else AugmentConfig()
    overrides: dict[str, object] = {}
    for name in (
        "p_mosaic",
        "p_patch_mix",
        "k_max",
        "min_area",
        "connectivity",
        "enable_flips",
        "enable_quarter_rotations",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.out_size is not None:
        overrides["out_size"] = _pair(args.out_size, "--out-size")
    if args.patch_classes is not None:
        overrides["patch_classes"] = tuple(args.patch_classes)
    return replace(cfg, **overrides) if overrides else cfg


def config_snapshot(cfg: AugmentConfig) -> dict[str, object]:
    out_size = "auto" if cfg.out_size is None else f"{cfg.out_size[0]}x{cfg.out_size[1]}"
    classes = (
        "default" if cfg.patch_classes is None else ",".join(map(str, cfg.patch_classes))
    )
    return {
        "p_mosaic": cfg.p_mosaic,
        "p_patch_mix": cfg.p_patch_mix,
        "out_size": out_size,
        "k_max": cfg.k_max,
        "min_area": cfg.min_area,
        "connectivity": cfg.connectivity,
        "patch_classes": classes,
        "enable_flips": cfg.enable_flips,
        "enable_quarter_rotations": cfg.enable_quarter_rotations,
    }


def _run_tasks(fn, tasks: list, workers: int, chunk_hint: int = 4):
    """Run tasks preserving order, optionally across worker processes."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunksize = max(1, len(tasks) // (workers * chunk_hint))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))


def _ensure_out_dirs(out: Path) -> None:
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "labels").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc


# ---------------------------------------------------------------------------
# tile
# ---------------------------------------------------------------------------

# Per-process caches for worker functions (each forked/spawned process
# fills its own copy; values are immutable once built).
_READERS: dict[str, SampleReader] = {}
_COLORMAPS: dict[str, ColorMap] = {}


def _get_reader(manifest_path: str) -> SampleReader:
    reader = _READERS.get(manifest_path)
    if reader is None:
        reader = SampleReader(load_manifest(Path(manifest_path)))
        _READERS[manifest_path] = reader
    return reader


def _get_colormap(path: str) -> ColorMap:
    cmap = _COLORMAPS.get(path)
    if cmap is None:
        cmap = load_colormap(Path(path))
        _COLORMAPS[path] = cmap
    return cmap


def _tile_scene(task: tuple) -> tuple[int, list[str]]:
    """Cut one scene into tiles and write them; returns tile basenames."""
    (
        entry_index,
        image_path,
        label_path,
        colormap_path,
        window,
        stride,
        out_dir,
    ) = task
    cmap = _get_colormap(colormap_path)
    image = read_image(image_path)
    label_rgb = read_image(label_path)
    if image.shape != label_rgb.shape:
        raise SizeError(
            f"{image_path} is {image.shape[1]}x{image.shape[0]} but "
            f"{label_path} is {label_rgb.shape[1]}x{label_rgb.shape[0]}"
        )
    label = label_from_color(label_rgb, cmap)
    del label_rgb
    h, w = label.shape
    spec = TileSpec(window=window, stride=stride)
    xs, ys = tile_grid(w, h, spec)
    tw, th = spec.window
    scene = Path(image_path).stem
    out = Path(out_dir)
    names: list[str] = []
    for row, y in enumerate(ys):
        for col, x in enumerate(xs):
            name = f"{scene}_r{row}_c{col}.png"
            write_image(out / "images" / name, image[y : y + th, x : x + tw])
            write_image(
                out / "labels" / name,
                color_from_label(label[y : y + th, x : x + tw], cmap),
            )
            names.append(name)
    return entry_index, names


def cmd_tile(args: argparse.Namespace) -> RunReport:
    started = time.monotonic()
    workers = resolve_workers(args)
    window = _pair(args.window, "--window")
    stride = _pair(args.stride, "--stride") if args.stride is not None else None
    manifest = load_manifest(args.manifest)
    out: Path = args.out
    _ensure_out_dirs(out)

    stems = [Path(e.image_path).stem for e in manifest.entries]
    dupes = sorted({s for s in stems if stems.count(s) > 1})
    if dupes:
        raise ConfigError(
            f"scene names must be unique to name tiles, duplicates: {', '.join(dupes)}"
        )

    colormap_src = manifest.resolve(manifest.colormap_path)
    (out / TILE_COLORMAP_NAME).write_bytes(colormap_src.read_bytes())

    tasks = [
        (
            i,
            str(manifest.resolve(e.image_path)),
            str(manifest.resolve(e.label_path)),
            str(colormap_src),
            window,
            stride,
            str(out),
        )
        for i, e in enumerate(manifest.entries)
    ]
    results = _run_tasks(_tile_scene, tasks, workers, chunk_hint=1)

    entries: list[ManifestEntry] = []
    total = 0
    per_split: dict[str, int] = {"train": 0, "test": 0}
    for entry_index, names in results:
        entry = manifest.entries[entry_index]
        for name in names:
            entries.append(
                ManifestEntry(
                    split=entry.split,
                    image_path=f"images/{name}",
                    label_path=f"labels/{name}",
                )
            )
        total += len(names)
        per_split[entry.split] += len(names)

    tiled = Manifest(
        entries=tuple(entries), colormap_path=TILE_COLORMAP_NAME, root=out
    )
    (out / TILE_MANIFEST_NAME).write_text(format_manifest(tiled), encoding="utf-8")

    report = RunReport(
        command="tile",
        config={
            "window": f"{window[0]}x{window[1]}",
            "stride": "window" if stride is None else f"{stride[0]}x{stride[1]}",
        },
        inputs=len(manifest.entries),
        outputs=total,
        counters={
            "train_tiles": per_split["train"],
            "test_tiles": per_split["test"],
        },
        wall_time=time.monotonic() - started,
    )
    _write_report(report, out)
    return report


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------


def _augment_one(task: tuple) -> tuple[int, bool, bool]:
    manifest_path, cfg, seed, index, out_dir = task
    reader = _get_reader(manifest_path)
    rng = sample_stream(seed, index)
    result = augment_sample(lambda r: reader.sample("train", r), cfg, rng)
    out = Path(out_dir)
    name = f"aug_{index:05d}.png"
    write_image(out / "images" / name, result.sample.image)
    write_image(
        out / "labels" / name, color_from_label(result.sample.label, reader.colormap)
    )
    return index, result.mosaic_applied, result.patch_mix_applied


def cmd_augment(args: argparse.Namespace) -> RunReport:
    started = time.monotonic()
    workers = resolve_workers(args)
    cfg = resolve_config(args)
    if cfg.out_size is None:
        raise ConfigError("out_size must be set (config file or --out-size)")
    manifest = load_manifest(args.manifest)
    if not manifest.split_entries("train"):
        raise EmptySplitError("train split has no entries; nothing to augment from")
    out: Path = args.out
    _ensure_out_dirs(out)

    tasks = [
        (str(args.manifest), cfg, args.seed, i, str(out))
        for i in range(args.n_samples)
    ]
    results = _run_tasks(_augment_one, tasks, workers)

    mosaic_count = sum(1 for _, used_mosaic, _ in results if used_mosaic)
    patch_mix_count = sum(1 for _, _, used_pm in results if used_pm)
    report = RunReport(
        command="augment",
        seed=args.seed,
        config=config_snapshot(cfg),
        inputs=args.n_samples,
        outputs=len(results),
        counters={
            "mosaic_applied": mosaic_count,
            "patch_mix_applied": patch_mix_count,
        },
        wall_time=time.monotonic() - started,
    )
    _write_report(report, out)
    return report


# ---------------------------------------------------------------------------
# preview
# ---------------------------------------------------------------------------


def cmd_preview(args: argparse.Namespace) -> RunReport:
    started = time.monotonic()
    cfg = resolve_config(args)
    if cfg.out_size is None:
        raise ConfigError("out_size must be set (config file or --out-size)")
    manifest = load_manifest(args.manifest)
    reader = SampleReader(manifest)
    rng = sample_stream(args.seed, 0)
    panel = render_preview(
        lambda r: reader.sample("train", r), cfg, reader.colormap, rng
    )
    out: Path = args.out
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_image(out, panel.assemble())
    return RunReport(
        command="preview",
        seed=args.seed,
        config=config_snapshot(cfg),
        inputs=1,
        outputs=1,
        wall_time=time.monotonic() - started,
    )


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _eval_one(task: tuple) -> np.ndarray:
    gt_path, pred_path, colormap_path = task
    cmap = _get_colormap(colormap_path)
    gt = label_from_color(read_image(gt_path), cmap)
    pred_rgb = read_image(pred_path)
    if pred_rgb.shape[:2] != gt.shape:
        raise SizeError(
            f"{pred_path} is {pred_rgb.shape[1]}x{pred_rgb.shape[0]} but "
            f"{gt_path} is {gt.shape[1]}x{gt.shape[0]}"
        )
    pred = label_from_color(pred_rgb, cmap)
    return confusion(pred, gt, cmap.num_classes).counts


def cmd_eval(args: argparse.Namespace) -> RunReport:
    started = time.monotonic()
    workers = resolve_workers(args)
    manifest = load_manifest(args.manifest)
    colormap_path = (
        Path(args.colormap)
        if args.colormap is not None
        else manifest.resolve(manifest.colormap_path)
    )
    cmap = load_colormap(colormap_path)
    entries = manifest.split_entries(args.split)
    if not entries:
        raise EvaluationError(f"split {args.split!r} has no entries to evaluate")

    pred_dir: Path = args.pred_dir
    pairs: list[tuple[str, str]] = []
    missing: list[str] = []
    for entry in entries:
        gt_path = manifest.resolve(entry.label_path)
        pred_path = pred_dir / gt_path.name
        if not pred_path.is_file():
            missing.append(str(pred_path))
        else:
            pairs.append((str(gt_path), str(pred_path)))
    if missing:
        raise EvaluationError(
            "missing prediction files:\n  " + "\n  ".join(missing)
        )

    tasks = [(gt, pred, str(colormap_path)) for gt, pred in pairs]
    counts_list = _run_tasks(_eval_one, tasks, workers)
    merged = zero_confusion(cmap.num_classes)
    for counts in counts_list:
        merged = merged + ConfusionMatrix(counts=counts, num_classes=cmap.num_classes)

    accuracy = pixel_accuracy(merged)
    mean_iou = miou(merged)
    iou, present = iou_per_class(merged)

    header = ["accuracy", "miou", *cmap.names]
    values = [f"{accuracy * 100:.2f}", f"{mean_iou * 100:.2f}"]
    for c in range(cmap.num_classes):
        values.append(f"{iou[c] * 100:.2f}" if present[c] else "absent")
    widths = [max(len(h), len(v)) for h, v in zip(header, values)]
    print("  ".join(h.rjust(w) for h, w in zip(header, widths)))
    print("  ".join(v.rjust(w) for v, w in zip(values, widths)))

    report = RunReport(
        command="eval",
        config={"split": args.split},
        inputs=len(entries),
        outputs=len(pairs),
        counters={"pixels": merged.total},
        wall_time=time.monotonic() - started,
    )
    print(f"accuracy={accuracy!r}")
    print(f"miou={mean_iou!r}")
    for c, name in enumerate(cmap.names):
        print(f"iou.{name}={float(iou[c])!r}")
        print(f"present.{name}={int(present[c])}")
    return report


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = args.func(args)
    except (PatchMosaicError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in report.lines(include_timing=True):
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
