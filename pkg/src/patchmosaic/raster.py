"""Raster containers, PNG codecs, and color/class-index translation.

Array conventions used throughout the package:

* image: ``(H, W, 3)`` uint8, RGB sample order.
* label map: ``(H, W)`` uint8, each pixel a class index in
  ``[0, num_classes)``.
* binary mask: ``(H, W)`` bool (integer arrays restricted to {0, 1}
  are accepted at entry points and normalized to bool).

Labels are stored on disk as color PNGs; a :class:`ColorMap` defines the
bijection between class indices and RGB triples.
"""

import importlib.resources
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ColorMapError, DecodeError, SizeError, UnsupportedFormatError

# Class indices are stored in uint8 label planes; 255 keeps headroom for
# every index to survive a round trip.
MAX_CLASSES = 255


# ---------------------------------------------------------------------------
# Array validation helpers
# ---------------------------------------------------------------------------


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate and normalize an RGB image array to (H, W, 3) uint8."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeError(f"image must be at least 1x1, got {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {arr.dtype}")
    return np.ascontiguousarray(arr)


def as_label(arr: np.ndarray, num_classes: int | None = None) -> np.ndarray:
    """Validate and normalize a label map to (H, W) uint8.

    When ``num_classes`` is given, every pixel must be strictly below it.
    """
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"label map must have shape (H, W), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeError(f"label map must be at least 1x1, got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"label map dtype must be integer, got {arr.dtype}")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) > MAX_CLASSES):
        raise ValueError("label values must fit in [0, 255]")
    if num_classes is not None and arr.size and int(arr.max()) >= num_classes:
        raise ValueError(
            f"label value {int(arr.max())} out of range for {num_classes} classes"
        )
    return np.ascontiguousarray(arr.astype(np.uint8, copy=False))


def as_mask(arr: np.ndarray) -> np.ndarray:
    """Validate and normalize a binary mask to (H, W) bool."""
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValueError(f"mask must have shape (H, W), got {arr.shape}")
    if arr.dtype == bool:
        return np.ascontiguousarray(arr)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"mask dtype must be bool or integer, got {arr.dtype}")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) > 1):
        raise ValueError("integer mask values must be 0 or 1")
    return np.ascontiguousarray(arr.astype(bool))


@dataclass(frozen=True)
class SamplePair:
    """An image and its pixel-aligned label map.

    The pair adopts the arrays it is given: they are normalized to
    contiguous uint8 and marked read-only, so a pair can be shared
    freely without defensive copies. Operations that change pixels
    always build new arrays and return a new pair.
    """

    image: np.ndarray
    label: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        image = as_image(self.image)
        if not 1 <= self.num_classes <= MAX_CLASSES:
            raise ValueError(
                f"num_classes must be in [1, {MAX_CLASSES}], got {self.num_classes}"
            )
        label = as_label(self.label, self.num_classes)
        if image.shape[:2] != label.shape:
            raise SizeError(
                f"image {image.shape[:2]} and label {label.shape} dimensions differ"
            )
        image.setflags(write=False)
        label.setflags(write=False)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "label", label)

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        """(width, height) of both planes."""
        return (self.width, self.height)


# ---------------------------------------------------------------------------
# PNG codecs
# ---------------------------------------------------------------------------


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an (H, W, 3) uint8 RGB array.

    Only 8-bit RGB and RGBA PNGs are accepted; the alpha channel of an
    RGBA image is dropped. Other containers (JPEG, ...) and other PNG
    layouts (16-bit, palette, grayscale) raise
    :class:`UnsupportedFormatError`; bytes that do not decode at all
    raise :class:`DecodeError`.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
            mode = im.mode
            if fmt != "PNG":
                raise UnsupportedFormatError(
                    f"unsupported container {fmt!r}, only PNG is accepted"
                )
            if mode not in ("RGB", "RGBA"):
                raise UnsupportedFormatError(
                    f"unsupported PNG mode {mode!r}, only 8-bit RGB/RGBA is accepted"
                )
            im.load()
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeError("bytes do not decode as an image") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        # Pillow surfaces truncated/corrupt streams as OSError/SyntaxError.
        raise DecodeError(f"corrupt image stream: {exc}") from exc
    if arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return np.ascontiguousarray(arr)


def encode_image(img: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 RGB array as PNG bytes (lossless)."""
    arr = as_image(img)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_image(path: str | Path) -> np.ndarray:
    return decode_image(Path(path).read_bytes())


def write_image(path: str | Path, img: np.ndarray) -> None:
    Path(path).write_bytes(encode_image(img))


# ---------------------------------------------------------------------------
# Color maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColorMap:
    """Bijection between class indices 0..C-1 and RGB triples.

    ``names[i]`` and ``colors[i]`` describe class index ``i``; colors
    must be pairwise distinct so the inverse mapping is well defined.
    """

    names: tuple[str, ...]
    colors: np.ndarray  # (C, 3) uint8

    def __post_init__(self) -> None:
        colors = np.asarray(self.colors)
        if colors.ndim != 2 or colors.shape[1] != 3:
            raise ColorMapError(f"colors must have shape (C, 3), got {colors.shape}")
        if not 1 <= len(self.names) <= MAX_CLASSES:
            raise ColorMapError(
                f"need between 1 and {MAX_CLASSES} classes, got {len(self.names)}"
            )
        if colors.shape[0] != len(self.names):
            raise ColorMapError(
                f"{len(self.names)} names but {colors.shape[0]} colors"
            )
        colors = np.ascontiguousarray(colors.astype(np.uint8))
        packed = _pack_rgb(colors)
        if np.unique(packed).size != packed.size:
            raise ColorMapError("class colors must be pairwise distinct")
        colors.setflags(write=False)
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(self, "colors", colors)

    @property
    def num_classes(self) -> int:
        return len(self.names)


def _pack_rgb(rgb: np.ndarray) -> np.ndarray:
    """Pack (..., 3) uint8 RGB into a single uint32 per pixel."""
    r = rgb[..., 0].astype(np.uint32)
    g = rgb[..., 1].astype(np.uint32)
    b = rgb[..., 2].astype(np.uint32)
    return (r << 16) | (g << 8) | b


def parse_colormap(text: str, source: str = "<string>") -> ColorMap:
    """Parse color map text: one ``<index> <name> <r> <g> <b>`` per line.

    Blank lines and ``#`` comments are skipped. Indices must cover
    0..C-1 exactly (any order, no duplicates); channel values must fit
    in [0, 255].
    """
    rows: dict[int, tuple[str, tuple[int, int, int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ColorMapError(
                f"{source}:{lineno}: expected '<index> <name> <r> <g> <b>', got {raw!r}"
            )
        try:
            index = int(parts[0])
            rgb = tuple(int(v) for v in parts[2:5])
        except ValueError as exc:
            raise ColorMapError(f"{source}:{lineno}: non-integer field in {raw!r}") from exc
        if index in rows:
            raise ColorMapError(f"{source}:{lineno}: duplicate class index {index}")
        if any(not 0 <= v <= 255 for v in rgb):
            raise ColorMapError(f"{source}:{lineno}: channel values must be in [0, 255]")
        rows[index] = (parts[1], rgb)  # type: ignore[assignment]
    if not rows:
        raise ColorMapError(f"{source}: no class definitions found")
    expected = set(range(len(rows)))
    if set(rows) != expected:
        raise ColorMapError(
            f"{source}: class indices must be contiguous from 0, got {sorted(rows)}"
        )
    names = tuple(rows[i][0] for i in range(len(rows)))
    colors = np.array([rows[i][1] for i in range(len(rows))], dtype=np.uint8)
    return ColorMap(names=names, colors=colors)


def load_colormap(path: str | Path) -> ColorMap:
    path = Path(path)
    return parse_colormap(path.read_text(encoding="utf-8"), source=str(path))


def format_colormap(cmap: ColorMap) -> str:
    """Render a ColorMap back to its text form (parse round trip)."""
    lines = [
        f"{i} {name} {int(c[0])} {int(c[1])} {int(c[2])}"
        for i, (name, c) in enumerate(zip(cmap.names, cmap.colors))
    ]
    return "\n".join(lines) + "\n"


def save_colormap(cmap: ColorMap, path: str | Path) -> None:
    Path(path).write_text(format_colormap(cmap), encoding="utf-8")


def potsdam_colormap() -> ColorMap:
    """The 6-class ISPRS Potsdam color scheme bundled with the package."""
    ref = importlib.resources.files("patchmosaic").joinpath("data/potsdam.colormap")
    return parse_colormap(ref.read_text(encoding="utf-8"), source="potsdam.colormap")


# ---------------------------------------------------------------------------
# Color <-> class-index translation
# ---------------------------------------------------------------------------


def label_from_color(
    img: np.ndarray, cmap: ColorMap, fallback_class: int | None = None
) -> np.ndarray:
    """Translate a color-coded label image to a class-index map.

    Every pixel color must appear in ``cmap``. An unmapped color raises
    :class:`ColorMapError` naming the RGB triple and the first pixel
    where it occurs, unless ``fallback_class`` is given, in which case
    offending pixels take that index instead.
    """
    arr = as_image(img)
    if fallback_class is not None and not 0 <= fallback_class < cmap.num_classes:
        raise ValueError(
            f"fallback_class {fallback_class} out of range for {cmap.num_classes} classes"
        )
    packed = _pack_rgb(arr)
    keys = _pack_rgb(cmap.colors)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    pos = np.searchsorted(sorted_keys, packed)
    pos = np.minimum(pos, sorted_keys.size - 1)
    matched = sorted_keys[pos] == packed
    if not matched.all():
        if fallback_class is None:
            ys, xs = np.nonzero(~matched)
            y, x = int(ys[0]), int(xs[0])
            r, g, b = (int(v) for v in arr[y, x])
            raise ColorMapError(
                f"unmapped color ({r}, {g}, {b}) at pixel (x={x}, y={y}); "
                "pass a fallback class to coerce unknown colors"
            )
        label = np.where(matched, order[pos], fallback_class)
        return label.astype(np.uint8)
    return order[pos].astype(np.uint8)


def color_from_label(label: np.ndarray, cmap: ColorMap) -> np.ndarray:
    """Translate a class-index map to its color-coded image."""
    arr = as_label(label)
    if arr.size and int(arr.max()) >= cmap.num_classes:
        raise ValueError(
            f"label value {int(arr.max())} out of range for {cmap.num_classes} classes"
        )
    return cmap.colors[arr]
