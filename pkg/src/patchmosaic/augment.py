"""Geometric transforms, mosaic assembly, and clustered patch mixing.

All randomness flows through an explicit ``numpy.random.Generator``, and
every operation documents its draw order, so a given (seed, sample
index) always produces the same output no matter how the work is
batched or parallelized.

Draw orders (one line per consumed draw, in sequence):

* ``random_geom``: horizontal-flip u, vertical-flip u (both only if
  flips enabled), quarter-turn count (only if rotations enabled), crop
  x offset, crop y offset.
* ``mosaic``: one full ``random_geom`` sequence per input, in order
  top-left, top-right, bottom-left, bottom-right.
* ``plan_patch_mix``: one ``random_geom`` sequence for the source, then
  (only if any instance qualifies) the patch count k, the instance
  choice, and per selected patch its x offset then y offset.
* ``augment_sample``: mosaic gate u, base-phase draws, patch-mix gate
  u, patch-mix draws. Gate draws happen even when the corresponding
  probability is 0 or 1.
"""

from collections.abc import Callable, Iterable
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .ccl import (
    DEFAULT_CONNECTIVITY,
    DEFAULT_MIN_AREA,
    Instance,
    check_connectivity,
    extract_instances,
)
from .errors import ConfigError, PlacementError, SizeError
from .raster import SamplePair

Sampler = Callable[[np.random.Generator], SamplePair]

DEFAULT_K_MAX = 8


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------


def run_stream(seed: int) -> np.random.Generator:
    """Root generator for a whole run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of a run.

    Streams are derived by spawn key rather than by jumping one shared
    stream, so sample i is reproducible in isolation and identical
    whether samples are generated serially or by a worker pool.
    """
    if index < 0:
        raise ValueError(f"sample index must be >= 0, got {index}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs for the two-phase augmentation pipeline.

    ``out_size`` is (width, height) of generated samples; both sides
    must be even (quadrants are exactly half) and at least 2. ``None``
    means the caller must supply it before running the pipeline.
    ``patch_classes`` selects which classes donate patches; ``None``
    means every class except the last (conventionally the clutter /
    background class).
    """

    p_mosaic: float = 0.5
    p_patch_mix: float = 0.5
    out_size: tuple[int, int] | None = None
    k_max: int = DEFAULT_K_MAX
    min_area: int = DEFAULT_MIN_AREA
    connectivity: int = DEFAULT_CONNECTIVITY
    patch_classes: tuple[int, ...] | None = None
    enable_flips: bool = True
    enable_quarter_rotations: bool = True

    def __post_init__(self) -> None:
        for name in ("p_mosaic", "p_patch_mix"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.out_size is not None:
            object.__setattr__(self, "out_size", check_out_size(self.out_size))
        if self.k_max < 1:
            raise ConfigError(f"k_max must be >= 1, got {self.k_max}")
        if self.min_area < 1:
            raise ConfigError(f"min_area must be >= 1, got {self.min_area}")
        try:
            check_connectivity(self.connectivity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.patch_classes is not None:
            classes = tuple(sorted(set(int(c) for c in self.patch_classes)))
            if any(c < 0 for c in classes):
                raise ConfigError(f"patch_classes must be >= 0, got {self.patch_classes}")
            object.__setattr__(self, "patch_classes", classes)


def check_out_size(size: tuple[int, int]) -> tuple[int, int]:
    w, h = (int(v) for v in size)
    if w < 2 or h < 2 or w % 2 or h % 2:
        raise ConfigError(f"out_size sides must be even and >= 2, got ({w}, {h})")
    return (w, h)


_BOOL_WORDS = {
    "true": True,
    "yes": True,
    "on": True,
    "1": True,
    "false": False,
    "no": False,
    "off": False,
    "0": False,
}


def _parse_bool(token: str, key: str, where: str) -> bool:
    try:
        return _BOOL_WORDS[token.lower()]
    except KeyError:
        raise ConfigError(f"{where}: {key} expects true/false, got {token!r}") from None


def parse_augment_config(text: str, source: str = "<string>") -> AugmentConfig:
    """Parse ``key value...`` config text into an :class:`AugmentConfig`.

    One key per line, mirroring the dataclass field names. Blank lines
    and ``#`` comments are skipped; unknown or duplicate keys are
    errors. ``out_size`` takes one (square) or two integers;
    ``patch_classes`` takes one or more class indices.
    """
    known = {f.name for f in fields(AugmentConfig)}
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *values = line.split()
        where = f"{source}:{lineno}"
        if key not in known:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate config key {key!r}")
        if not values:
            raise ConfigError(f"{where}: {key} is missing a value")
        try:
            if key in ("p_mosaic", "p_patch_mix"):
                (token,) = values
                seen[key] = float(token)
            elif key in ("k_max", "min_area", "connectivity"):
                (token,) = values
                seen[key] = int(token)
            elif key == "out_size":
                if len(values) == 1:
                    seen[key] = (int(values[0]), int(values[0]))
                elif len(values) == 2:
                    seen[key] = (int(values[0]), int(values[1]))
                else:
                    raise ConfigError(f"{where}: out_size takes 1 or 2 integers")
            elif key == "patch_classes":
                seen[key] = tuple(int(v) for v in values)
            else:  # enable_flips / enable_quarter_rotations
                (token,) = values
                seen[key] = _parse_bool(token, key, where)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key}: {exc}") from None
    return AugmentConfig(**seen)  # type: ignore[arg-type]


def load_augment_config(path: str | Path) -> AugmentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_augment_config(text, source=str(path))


def resolve_patch_classes(cfg: AugmentConfig, num_classes: int) -> list[int]:
    """Concrete donor-class list for a dataset with ``num_classes``."""
    if cfg.patch_classes is None:
        return list(range(num_classes - 1))
    bad = [c for c in cfg.patch_classes if c >= num_classes]
    if bad:
        raise ConfigError(
            f"patch_classes {bad} out of range for {num_classes} classes"
        )
    return list(cfg.patch_classes)


# ---------------------------------------------------------------------------
# Deterministic geometry
# ---------------------------------------------------------------------------


def flip(s: SamplePair, horizontal: bool = False, vertical: bool = False) -> SamplePair:
    """Mirror a pair horizontally (around the vertical axis) and/or vertically."""
    image, label = s.image, s.label
    if horizontal:
        image = np.flip(image, axis=1)
        label = np.flip(label, axis=1)
    if vertical:
        image = np.flip(image, axis=0)
        label = np.flip(label, axis=0)
    if image is s.image:
        return s
    return SamplePair(image=image, label=label, num_classes=s.num_classes)


def rotate_quarter(s: SamplePair, quarter_turns: int) -> SamplePair:
    """Rotate a pair counter-clockwise by ``quarter_turns`` * 90 degrees."""
    k = int(quarter_turns) % 4
    if k == 0:
        return s
    return SamplePair(
        image=np.rot90(s.image, k),
        label=np.rot90(s.label, k),
        num_classes=s.num_classes,
    )


def random_crop(s: SamplePair, size: tuple[int, int], rng: np.random.Generator) -> SamplePair:
    """Crop a window of ``size`` (width, height) at a uniform offset.

    Consumes two draws: x offset, then y offset (both drawn even when
    only one placement is possible).
    """
    w, h = (int(v) for v in size)
    if w < 1 or h < 1:
        raise SizeError(f"crop size must be at least 1x1, got ({w}, {h})")
    if w > s.width or h > s.height:
        raise SizeError(
            f"crop {w}x{h} does not fit in source {s.width}x{s.height}"
        )
    x0 = int(rng.integers(0, s.width - w + 1))
    y0 = int(rng.integers(0, s.height - h + 1))
    return SamplePair(
        image=s.image[y0 : y0 + h, x0 : x0 + w].copy(),
        label=s.label[y0 : y0 + h, x0 : x0 + w].copy(),
        num_classes=s.num_classes,
    )


def random_geom(
    s: SamplePair,
    size: tuple[int, int],
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> SamplePair:
    """Random flip, then random quarter rotation, then random crop.

    Flip and rotation stages are skipped (and their draws not consumed)
    when disabled in ``cfg``; the crop draws always happen. The crop
    target must fit the post-rotation dimensions.
    """
    if cfg.enable_flips:
        horizontal = bool(rng.random() < 0.5)
        vertical = bool(rng.random() < 0.5)
        s = flip(s, horizontal=horizontal, vertical=vertical)
    if cfg.enable_quarter_rotations:
        s = rotate_quarter(s, int(rng.integers(0, 4)))
    return random_crop(s, size, rng)


# ---------------------------------------------------------------------------
# Mosaic phase
# ---------------------------------------------------------------------------


def mosaic(
    s1: SamplePair,
    s2: SamplePair,
    s3: SamplePair,
    s4: SamplePair,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> SamplePair:
    """Assemble four independently transformed inputs into one pair.

    Each input is cropped to exactly half of ``cfg.out_size`` after its
    own random flip/rotation, then placed clockwise from the top-left:
    s1 top-left, s2 top-right, s3 bottom-left, s4 bottom-right.
    """
    if cfg.out_size is None:
        raise ConfigError("out_size must be set to build a mosaic")
    out_w, out_h = cfg.out_size
    half = (out_w // 2, out_h // 2)
    inputs = (s1, s2, s3, s4)
    num_classes = s1.num_classes
    if any(s.num_classes != num_classes for s in inputs):
        raise ValueError("mosaic inputs must share num_classes")
    quads: list[SamplePair] = []
    for i, s in enumerate(inputs):
        try:
            quads.append(random_geom(s, half, cfg, rng))
        except SizeError as exc:
            raise SizeError(f"mosaic input {i + 1}: {exc}") from None
    image = np.empty((out_h, out_w, 3), dtype=np.uint8)
    label = np.empty((out_h, out_w), dtype=np.uint8)
    hw, hh = half
    slots = ((0, 0), (hw, 0), (0, hh), (hw, hh))
    for (x, y), quad in zip(slots, quads):
        image[y : y + hh, x : x + hw] = quad.image
        label[y : y + hh, x : x + hw] = quad.label
    return SamplePair(image=image, label=label, num_classes=num_classes)


# ---------------------------------------------------------------------------
# Clustered patch mix phase
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Patch:
    """Pixels of one instance, cropped to its bounding box."""

    pixels: np.ndarray  # (bh, bw, 3) uint8
    mask: np.ndarray  # (bh, bw) bool
    class_index: int

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class PlacedPatch:
    patch: Patch
    offset: tuple[int, int]  # (x, y) of the patch box top-left on the canvas


@dataclass(frozen=True)
class PatchMixPlan:
    """Everything the patch-mix phase decided, before pixels move.

    ``source`` is the donor pair after its random geometry;
    ``instances`` are all qualifying donor instances; ``placed`` are
    the selected patches with their paste offsets, in selection order.
    """

    source: SamplePair
    instances: tuple[Instance, ...]
    placed: tuple[PlacedPatch, ...]

    def coverage_mask(self, width: int, height: int) -> np.ndarray:
        """Union of the placed patch masks on a (height, width) canvas."""
        out = np.zeros((height, width), dtype=bool)
        for pp in self.placed:
            x, y = pp.offset
            out[y : y + pp.patch.height, x : x + pp.patch.width] |= pp.patch.mask
        return out


def make_patch(source: SamplePair, instance: Instance) -> Patch:
    x0, y0, x1, y1 = instance.bbox
    return Patch(
        pixels=source.image[y0 : y1 + 1, x0 : x1 + 1].copy(),
        mask=instance.mask,
        class_index=instance.class_index,
    )


def paste_patch(s: SamplePair, patch: Patch, offset: tuple[int, int]) -> SamplePair:
    """Composite one patch onto a pair under its binary mask.

    Image and label update jointly: where the mask is True the output
    takes the patch pixel and the patch class; everywhere else the base
    pixel survives. The whole patch box must land inside the canvas.
    """
    x, y = (int(v) for v in offset)
    if x < 0 or y < 0 or x + patch.width > s.width or y + patch.height > s.height:
        raise PlacementError(
            f"patch {patch.width}x{patch.height} at ({x}, {y}) leaves the "
            f"{s.width}x{s.height} canvas"
        )
    if patch.class_index >= s.num_classes:
        raise ValueError(
            f"patch class {patch.class_index} out of range for {s.num_classes} classes"
        )
    image = s.image.copy()
    label = s.label.copy()
    _composite(image, label, patch, x, y)
    return SamplePair(image=image, label=label, num_classes=s.num_classes)


def _composite(image: np.ndarray, label: np.ndarray, patch: Patch, x: int, y: int) -> None:
    m = patch.mask
    img_box = image[y : y + patch.height, x : x + patch.width]
    lbl_box = label[y : y + patch.height, x : x + patch.width]
    img_box[m] = patch.pixels[m]
    lbl_box[m] = patch.class_index


def plan_patch_mix(
    base: SamplePair,
    source: SamplePair,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> PatchMixPlan:
    """Decide which donor instances to paste where.

    The donor goes through ``random_geom`` to the base size first
    (donors larger than the base are cropped down; smaller ones raise
    :class:`SizeError`). Qualifying instances are those surviving the
    class filter and ``min_area``; any whose box exceeds the canvas
    would be skipped rather than clipped, though none can occur once
    the donor is cropped to the base size. k is uniform on
    [1, min(k_max, n)]; instances are drawn without replacement; each
    selected patch then draws its x and y offsets uniformly over all
    placements that keep the patch box inside the canvas.
    """
    if base.num_classes != source.num_classes:
        raise ValueError("base and source must share num_classes")
    src = random_geom(source, base.size, cfg, rng)
    classes = resolve_patch_classes(cfg, base.num_classes)
    instances = [
        inst
        for inst in extract_instances(
            src.label,
            classes,
            connectivity=cfg.connectivity,
            min_area=cfg.min_area,
            num_classes=base.num_classes,
        )
        if inst.box_width <= base.width and inst.box_height <= base.height
    ]
    placed: list[PlacedPatch] = []
    if instances:
        n = len(instances)
        k = int(rng.integers(1, min(cfg.k_max, n) + 1))
        chosen = rng.choice(n, size=k, replace=False)
        for idx in chosen.tolist():
            patch = make_patch(src, instances[idx])
            x = int(rng.integers(0, base.width - patch.width + 1))
            y = int(rng.integers(0, base.height - patch.height + 1))
            placed.append(PlacedPatch(patch=patch, offset=(x, y)))
    return PatchMixPlan(source=src, instances=tuple(instances), placed=tuple(placed))


def apply_patches(base: SamplePair, placed: Iterable[PlacedPatch]) -> SamplePair:
    """Paste patches sequentially; later patches overwrite earlier ones."""
    image = base.image.copy()
    label = base.label.copy()
    for pp in placed:
        x, y = pp.offset
        if (
            x < 0
            or y < 0
            or x + pp.patch.width > base.width
            or y + pp.patch.height > base.height
        ):
            raise PlacementError(
                f"patch {pp.patch.width}x{pp.patch.height} at ({x}, {y}) leaves "
                f"the {base.width}x{base.height} canvas"
            )
        _composite(image, label, pp.patch, x, y)
    return SamplePair(image=image, label=label, num_classes=base.num_classes)


def clustered_patch_mix(
    base: SamplePair,
    source: SamplePair,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> SamplePair:
    """Paste a random cluster of donor instances onto the base pair.

    If no donor instance qualifies (class filter plus min_area), the
    base is returned unchanged apart from the consumed geometry draws.
    """
    plan = plan_patch_mix(base, source, cfg, rng)
    if not plan.placed:
        return base
    return apply_patches(base, plan.placed)


# ---------------------------------------------------------------------------
# Two-phase pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentResult:
    sample: SamplePair
    mosaic_applied: bool
    patch_mix_applied: bool


def augment_sample(
    sampler: Sampler,
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> AugmentResult:
    """Run the full two-phase pipeline for one output sample.

    Phase 1: with probability ``p_mosaic`` build a mosaic from four
    fresh draws, otherwise geometry-transform a single fresh draw to
    ``out_size``. Phase 2: with probability ``p_patch_mix`` paste
    instance patches from one more fresh draw onto the phase-1 result.
    """
    if cfg.out_size is None:
        raise ConfigError("out_size must be set to run the pipeline")
    use_mosaic = bool(rng.random() < cfg.p_mosaic)
    if use_mosaic:
        base = mosaic(sampler(rng), sampler(rng), sampler(rng), sampler(rng), cfg, rng)
    else:
        base = random_geom(sampler(rng), cfg.out_size, cfg, rng)
    use_patch_mix = bool(rng.random() < cfg.p_patch_mix)
    if use_patch_mix:
        out = clustered_patch_mix(base, sampler(rng), cfg, rng)
    else:
        out = base
    return AugmentResult(
        sample=out,
        mosaic_applied=use_mosaic,
        patch_mix_applied=use_patch_mix,
    )
