"""Eight-row diagnostic panel walking one sample through the pipeline.

Rows, top to bottom (all exactly out_size, stacked with no separators):

    A  mosaic image            (phase 1 output)
    B  mosaic label            (color-coded)
    C  patch-source image      (donor after its random geometry)
    D  patch-source label      (color-coded)
    E  donor instances         (each connected instance in a cycling color)
    F  selected patch masks    (union, at their paste positions, white on black)
    G  final image             (phase 2 output)
    H  final label             (color-coded)

Both phases are applied unconditionally here (the probability gates are
for production sampling, not inspection). Because row F shows the
selected masks at their paste offsets, it is exactly the compositing
mask: the final image G can differ from the mosaic A only where F is
white.
"""

from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig, Sampler, apply_patches, mosaic, plan_patch_mix
from .ccl import Instance
from .raster import ColorMap, color_from_label

ROW_NAMES = (
    "mosaic_image",
    "mosaic_label",
    "source_image",
    "source_label",
    "instances",
    "selected_masks",
    "output_image",
    "output_label",
)

# Cycling high-contrast colors for instance display; black stays background.
INSTANCE_PALETTE = np.array(
    [
        (230, 25, 75),
        (60, 180, 75),
        (255, 225, 25),
        (0, 130, 200),
        (245, 130, 48),
        (145, 30, 180),
        (70, 240, 240),
        (240, 50, 230),
        (210, 245, 60),
        (250, 190, 212),
        (0, 128, 128),
        (170, 110, 40),
    ],
    dtype=np.uint8,
)


@dataclass(frozen=True)
class PreviewPanel:
    rows: tuple[np.ndarray, ...]  # 8 arrays of (H, W, 3) uint8

    def __post_init__(self) -> None:
        if len(self.rows) != len(ROW_NAMES):
            raise ValueError(f"panel needs {len(ROW_NAMES)} rows, got {len(self.rows)}")

    def row(self, name: str) -> np.ndarray:
        return self.rows[ROW_NAMES.index(name)]

    def assemble(self) -> np.ndarray:
        """Stack the rows vertically into one image."""
        return np.concatenate(self.rows, axis=0)


def paint_instances(
    height: int, width: int, instances: "tuple[Instance, ...] | list[Instance]"
) -> np.ndarray:
    """Render instances at their source positions, one palette color each."""
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    for i, inst in enumerate(instances):
        x0, y0, x1, y1 = inst.bbox
        box = canvas[y0 : y1 + 1, x0 : x1 + 1]
        box[inst.mask] = INSTANCE_PALETTE[i % len(INSTANCE_PALETTE)]
    return canvas


def mask_to_rgb(mask: np.ndarray) -> np.ndarray:
    return np.repeat(np.where(mask, 255, 0).astype(np.uint8)[:, :, None], 3, axis=2)


def render_preview(
    sampler: Sampler,
    cfg: AugmentConfig,
    cmap: ColorMap,
    rng: np.random.Generator,
) -> PreviewPanel:
    """Run one forced mosaic + patch-mix pass and capture every stage.

    Consumes draws exactly like the gated pipeline would on a
    (mosaic=yes, patch-mix=yes) sample, minus the two gate draws.
    """
    base = mosaic(sampler(rng), sampler(rng), sampler(rng), sampler(rng), cfg, rng)
    donor = sampler(rng)
    plan = plan_patch_mix(base, donor, cfg, rng)
    final = apply_patches(base, plan.placed)
    coverage = plan.coverage_mask(base.width, base.height)
    rows = (
        base.image,
        color_from_label(base.label, cmap),
        plan.source.image,
        color_from_label(plan.source.label, cmap),
        paint_instances(base.height, base.width, plan.instances),
        mask_to_rgb(coverage),
        final.image,
        color_from_label(final.label, cmap),
    )
    return PreviewPanel(rows=rows)
