"""Dataset manifests, sliding-window tiling, and deterministic sample serving.

A manifest is a plain-text file listing image/label PNG pairs per
split, with one header line naming the color map:

    colormap <path>
    train <image_path> <label_path>
    test <image_path> <label_path>

All paths are relative to the manifest file's directory (absolute
paths pass through unchanged). Blank lines and ``#`` comments are
skipped. Paths must not contain whitespace.
"""

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptySplitError, ManifestError, SizeError
from .raster import (
    ColorMap,
    SamplePair,
    label_from_color,
    load_colormap,
    read_image,
)

SPLITS = ("train", "test")

# Decoded pairs kept per reader; tiles are ~4 MB each at 1000x1000.
DEFAULT_CACHE_SIZE = 64


@dataclass(frozen=True)
class ManifestEntry:
    split: str
    image_path: str
    label_path: str


@dataclass(frozen=True)
class Manifest:
    """Parsed manifest plus the directory its paths are relative to."""

    entries: tuple[ManifestEntry, ...]
    colormap_path: str
    root: Path

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        return [e for e in self.entries if e.split == split]


def parse_manifest(text: str, root: Path, source: str = "<string>") -> Manifest:
    colormap_path: str | None = None
    entries: list[ManifestEntry] = []
    seen_images: set[str] = set()
    seen_labels: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        where = f"{source}:{lineno}"
        if parts[0] == "colormap":
            if len(parts) != 2:
                raise ManifestError(f"{where}: expected 'colormap <path>'")
            if colormap_path is not None:
                raise ManifestError(f"{where}: duplicate colormap line")
            colormap_path = parts[1]
            continue
        if parts[0] not in SPLITS:
            raise ManifestError(
                f"{where}: unknown split {parts[0]!r} (expected one of {SPLITS})"
            )
        if len(parts) != 3:
            raise ManifestError(f"{where}: expected '<split> <image> <label>'")
        split, image_path, label_path = parts
        if image_path in seen_images:
            raise ManifestError(f"{where}: duplicate image path {image_path}")
        if label_path in seen_labels:
            raise ManifestError(f"{where}: duplicate label path {label_path}")
        seen_images.add(image_path)
        seen_labels.add(label_path)
        entries.append(ManifestEntry(split=split, image_path=image_path, label_path=label_path))
    if colormap_path is None:
        raise ManifestError(f"{source}: missing 'colormap <path>' line")
    return Manifest(entries=tuple(entries), colormap_path=colormap_path, root=root)


def load_manifest(path: str | Path, check_files: bool = True) -> Manifest:
    """Load and validate a manifest file.

    With ``check_files`` (the default) every referenced path must
    exist; all missing paths are reported in one error.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    manifest = parse_manifest(text, root=path.parent, source=str(path))
    if check_files:
        missing = [
            str(manifest.resolve(rel))
            for rel in _referenced_paths(manifest)
            if not manifest.resolve(rel).is_file()
        ]
        if missing:
            raise ManifestError(
                "manifest references missing files:\n  " + "\n  ".join(missing)
            )
    return manifest


def _referenced_paths(m: Manifest) -> list[str]:
    out = [m.colormap_path]
    for e in m.entries:
        out.append(e.image_path)
        out.append(e.label_path)
    return out


def format_manifest(m: Manifest) -> str:
    lines = [f"colormap {m.colormap_path}"]
    lines += [f"{e.split} {e.image_path} {e.label_path}" for e in m.entries]
    return "\n".join(lines) + "\n"


def save_manifest(m: Manifest, path: str | Path) -> None:
    """Write a manifest; paths are kept as-is (relative to the new file)."""
    Path(path).write_text(format_manifest(m), encoding="utf-8")


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TileSpec:
    """Sliding-window geometry. Stride defaults to the window size
    (non-overlapping tiles)."""

    window: tuple[int, int]
    stride: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        w, h = (int(v) for v in self.window)
        if w < 1 or h < 1:
            raise ValueError(f"window sides must be >= 1, got ({w}, {h})")
        object.__setattr__(self, "window", (w, h))
        stride = self.stride if self.stride is not None else (w, h)
        sx, sy = (int(v) for v in stride)
        if sx < 1 or sy < 1:
            raise ValueError(f"stride sides must be >= 1, got ({sx}, {sy})")
        object.__setattr__(self, "stride", (sx, sy))


def tile_grid(scene_w: int, scene_h: int, spec: TileSpec) -> tuple[list[int], list[int]]:
    """x offsets and y offsets of all fully contained windows."""
    w, h = spec.window
    sx, sy = spec.stride  # type: ignore[misc]
    if scene_w < w or scene_h < h:
        raise SizeError(
            f"scene {scene_w}x{scene_h} is smaller than the {w}x{h} window"
        )
    xs = list(range(0, scene_w - w + 1, sx))
    ys = list(range(0, scene_h - h + 1, sy))
    return xs, ys


def tile_count(scene_w: int, scene_h: int, spec: TileSpec) -> int:
    xs, ys = tile_grid(scene_w, scene_h, spec)
    return len(xs) * len(ys)


def tile(s: SamplePair, spec: TileSpec) -> list[SamplePair]:
    """Cut a scene into windows, row-major (left-to-right, top-to-bottom).

    Windows land at offsets (i*sx, j*sy) and must fit entirely inside
    the scene; edge remainders are dropped, never padded.
    """
    xs, ys = tile_grid(s.width, s.height, spec)
    w, h = spec.window
    out: list[SamplePair] = []
    for y in ys:
        for x in xs:
            out.append(
                SamplePair(
                    image=s.image[y : y + h, x : x + w].copy(),
                    label=s.label[y : y + h, x : x + w].copy(),
                    num_classes=s.num_classes,
                )
            )
    return out


# ---------------------------------------------------------------------------
# Sample serving
# ---------------------------------------------------------------------------


class SampleReader:
    """Serves decoded pairs from a manifest, uniformly at random per split.

    Decoded pairs are cached (LRU) since augmentation revisits a small
    working set of tiles. Reading is pure given the generator state, so
    per-index generator streams make sample i reproducible regardless
    of batch order or worker count.
    """

    def __init__(self, manifest: Manifest, cache_size: int = DEFAULT_CACHE_SIZE):
        self.manifest = manifest
        self.colormap: ColorMap = load_colormap(manifest.resolve(manifest.colormap_path))
        self._by_split = {split: manifest.split_entries(split) for split in SPLITS}
        self._cache: OrderedDict[tuple[str, str], SamplePair] = OrderedDict()
        self._cache_size = max(1, int(cache_size))

    @property
    def num_classes(self) -> int:
        return self.colormap.num_classes

    def load_pair(self, entry: ManifestEntry) -> SamplePair:
        key = (entry.image_path, entry.label_path)
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        image = read_image(self.manifest.resolve(entry.image_path))
        label_rgb = read_image(self.manifest.resolve(entry.label_path))
        if image.shape != label_rgb.shape:
            raise SizeError(
                f"{entry.image_path} is {image.shape[1]}x{image.shape[0]} but "
                f"{entry.label_path} is {label_rgb.shape[1]}x{label_rgb.shape[0]}"
            )
        label = label_from_color(label_rgb, self.colormap)
        pair = SamplePair(image=image, label=label, num_classes=self.num_classes)
        self._cache[key] = pair
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return pair

    def sample(self, split: str, rng: np.random.Generator) -> SamplePair:
        """Uniform draw over the split's entries (one draw consumed)."""
        entries = self._by_split.get(split)
        if entries is None:
            raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
        if not entries:
            raise EmptySplitError(f"split {split!r} has no entries")
        idx = int(rng.integers(0, len(entries)))
        return self.load_pair(entries[idx])
