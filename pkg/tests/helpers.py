"""Builders for synthetic pairs and on-disk datasets used across tests."""

from pathlib import Path

import numpy as np

from patchmosaic import (
    ColorMap,
    SamplePair,
    color_from_label,
    potsdam_colormap,
    save_colormap,
    write_image,
)

POTSDAM = potsdam_colormap()


def random_pair(
    rng: np.random.Generator, width: int, height: int, num_classes: int = 6
) -> SamplePair:
    image = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    label = rng.integers(0, num_classes, size=(height, width), dtype=np.uint8)
    return SamplePair(image=image, label=label, num_classes=num_classes)


def uniform_pair(
    class_index: int,
    width: int,
    height: int,
    num_classes: int = 6,
    color: tuple[int, int, int] | None = None,
) -> SamplePair:
    if color is None:
        color = (40 * class_index + 10,) * 3
    image = np.empty((height, width, 3), dtype=np.uint8)
    image[:] = color
    label = np.full((height, width), class_index, dtype=np.uint8)
    return SamplePair(image=image, label=label, num_classes=num_classes)


def blobby_pair(
    rng: np.random.Generator,
    width: int,
    height: int,
    num_classes: int = 6,
    blob_classes: tuple[int, ...] = (3, 4),
    n_blobs: int = 5,
) -> SamplePair:
    """Background of the last class with rectangular blobs of other classes."""
    image = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    label = np.full((height, width), num_classes - 1, dtype=np.uint8)
    for _ in range(n_blobs):
        cls = int(rng.choice(blob_classes))
        bw = int(rng.integers(2, max(3, width // 3)))
        bh = int(rng.integers(2, max(3, height // 3)))
        x = int(rng.integers(0, width - bw + 1))
        y = int(rng.integers(0, height - bh + 1))
        label[y : y + bh, x : x + bw] = cls
    return SamplePair(image=image, label=label, num_classes=num_classes)


def write_dataset(
    root: Path,
    scenes: list[tuple[str, str, SamplePair]],
    cmap: ColorMap = POTSDAM,
) -> Path:
    """Write (split, name, pair) scenes plus colormap; returns manifest path.

    Layout: images/<name>.png, labels/<name>.png (color-coded),
    colormap.txt, manifest.txt.
    """
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    save_colormap(cmap, root / "colormap.txt")
    lines = ["colormap colormap.txt"]
    for split, name, pair in scenes:
        write_image(root / "images" / f"{name}.png", pair.image)
        write_image(root / "labels" / f"{name}.png", color_from_label(pair.label, cmap))
        lines.append(f"{split} images/{name}.png labels/{name}.png")
    manifest_path = root / "manifest.txt"
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest_path


def cycling_sampler(pairs: list[SamplePair]):
    """Sampler drawing uniformly from a fixed pool (one rng draw each)."""

    def sampler(rng: np.random.Generator) -> SamplePair:
        return pairs[int(rng.integers(0, len(pairs)))]

    return sampler
