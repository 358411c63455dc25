"""Connected-component labeling and per-class instance extraction.

The labeler is a run-based two-pass algorithm: foreground pixels are
grouped into maximal horizontal runs, runs on adjacent rows are linked
when they touch under the chosen connectivity, and a union-find pass
merges linked runs into components. Component IDs are then compacted to
1..count in the order each component is first reached by a raster scan
(top-to-bottom, left-to-right), which makes labeling deterministic and
convenient to test against a flood-fill reference.
"""

from dataclasses import dataclass

import numpy as np

from .raster import as_label, as_mask

CONNECTIVITIES = (4, 8)

DEFAULT_CONNECTIVITY = 8
DEFAULT_MIN_AREA = 64


def check_connectivity(connectivity: int) -> int:
    if connectivity not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity!r}")
    return int(connectivity)


@dataclass(frozen=True)
class InstanceMap:
    """Dense component labeling of a binary mask.

    ``ids`` holds 0 for background and values 1..count for foreground,
    where two pixels share a value iff they are connected. IDs are
    assigned in first-encounter raster-scan order.
    """

    ids: np.ndarray  # (H, W) int32
    count: int


@dataclass(frozen=True)
class Instance:
    """One connected component of one class, cropped to its bounding box.

    ``bbox`` is inclusive ``(min_x, min_y, max_x, max_y)`` in source
    coordinates; ``mask`` covers exactly that box and is True on the
    component's pixels, so ``mask.sum() == area`` and every box edge
    touches at least one True pixel.
    """

    id: int
    class_index: int
    area: int
    bbox: tuple[int, int, int, int]
    mask: np.ndarray  # (bbox_h, bbox_w) bool

    @property
    def box_width(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def box_height(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


def _runs(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decompose a mask into horizontal runs, in raster order.

    Returns (row, start_col, end_col) per run, end exclusive.
    """
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    edges = np.diff(padded, axis=1)
    rows, starts = np.nonzero(edges == 1)
    ends = np.nonzero(edges == -1)[1]
    return rows, starts, ends


def label_components(mask: np.ndarray, connectivity: int = DEFAULT_CONNECTIVITY) -> InstanceMap:
    """Label the connected components of a binary mask.

    ``connectivity`` 4 links orthogonal neighbors only; 8 adds the
    diagonals.
    """
    mask = as_mask(mask)
    check_connectivity(connectivity)
    h, w = mask.shape
    ids = np.zeros((h, w), dtype=np.int32)

    rows, starts, ends = _runs(mask)
    n = rows.size
    if n == 0:
        return InstanceMap(ids=ids, count=0)

    # Runs [s, e) and [s', e') on adjacent rows touch iff s' < e and
    # s < e' (4-connectivity), with both intervals widened by one pixel
    # for 8-connectivity. Keying runs by row*(w+2)+col keeps both key
    # arrays globally sorted, so each run finds the overlapping runs of
    # the previous row with two binary searches.
    stride = w + 2
    reach = 1 if connectivity == 8 else 0
    start_keys = rows * stride + starts
    end_keys = rows * stride + ends
    prev_base = (rows - 1) * stride
    lo = np.searchsorted(end_keys, prev_base + starts - reach, side="right")
    hi = np.searchsorted(start_keys, prev_base + ends + reach, side="left")
    counts = hi - lo

    parent = list(range(n))
    if counts.any():
        total = int(counts.sum())
        cur = np.repeat(np.arange(n), counts)
        seg_first = np.repeat(np.cumsum(counts) - counts, counts)
        prev = np.repeat(lo, counts) + np.arange(total) - seg_first
        for x, y in zip(cur.tolist(), prev.tolist()):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            while parent[y] != y:
                parent[y] = parent[parent[y]]
                y = parent[y]
            if x != y:
                if x < y:
                    parent[y] = x
                else:
                    parent[x] = y

    roots = np.asarray(parent, dtype=np.int64)
    while True:
        hop = roots[roots]
        if np.array_equal(hop, roots):
            break
        roots = hop

    # Compact root values to 1..count in first-encounter raster order.
    uniq, first_pos = np.unique(roots, return_index=True)
    order = np.argsort(first_pos)
    lut = np.zeros(n, dtype=np.int32)
    lut[uniq[order]] = np.arange(1, uniq.size + 1, dtype=np.int32)
    run_ids = lut[roots]

    lengths = ends - starts
    total_px = int(lengths.sum())
    flat_start = rows.astype(np.int64) * w + starts
    seg_first = np.repeat(np.cumsum(lengths) - lengths, lengths)
    positions = np.repeat(flat_start, lengths) + np.arange(total_px) - seg_first
    ids.ravel()[positions] = np.repeat(run_ids, lengths)
    return InstanceMap(ids=ids, count=int(uniq.size))


def instances_from_map(
    comp: InstanceMap, class_index: int, min_area: int = 1
) -> list[Instance]:
    """Crop each component of a labeling into an :class:`Instance`.

    Components smaller than ``min_area`` pixels are dropped. Results are
    ordered by component ID.
    """
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    if comp.count == 0:
        return []
    areas = np.bincount(comp.ids.ravel(), minlength=comp.count + 1)[1:]
    ys, xs = np.nonzero(comp.ids)
    vals = comp.ids[ys, xs]
    order = np.argsort(vals, kind="stable")  # stable keeps raster order per ID
    ys, xs, vals = ys[order], xs[order], vals[order]
    bounds = np.searchsorted(vals, np.arange(1, comp.count + 2))
    seg_start = bounds[:-1]
    min_x = np.minimum.reduceat(xs, seg_start)
    max_x = np.maximum.reduceat(xs, seg_start)
    min_y = ys[seg_start]
    max_y = ys[bounds[1:] - 1]

    out: list[Instance] = []
    for k in range(comp.count):
        area = int(areas[k])
        if area < min_area:
            continue
        x0, y0 = int(min_x[k]), int(min_y[k])
        x1, y1 = int(max_x[k]), int(max_y[k])
        mask = comp.ids[y0 : y1 + 1, x0 : x1 + 1] == k + 1
        out.append(
            Instance(
                id=k + 1,
                class_index=class_index,
                area=area,
                bbox=(x0, y0, x1, y1),
                mask=mask,
            )
        )
    return out


def extract_instances(
    label: np.ndarray,
    classes: "list[int] | tuple[int, ...] | range",
    connectivity: int = DEFAULT_CONNECTIVITY,
    min_area: int = DEFAULT_MIN_AREA,
    num_classes: int | None = None,
) -> list[Instance]:
    """Find the connected instances of the given classes in a label map.

    Each requested class is labeled independently (pixels of other
    classes act as background) and instances below ``min_area`` are
    discarded. The result is ordered by (class_index, id) ascending.
    """
    label = as_label(label, num_classes)
    wanted = sorted(set(int(c) for c in classes))
    limit = num_classes if num_classes is not None else 256  # uint8 ceiling
    for c in wanted:
        if not 0 <= c < limit:
            raise ValueError(f"class index {c} out of range [0, {limit})")
    out: list[Instance] = []
    for c in wanted:
        comp = label_components(label == c, connectivity)
        out.extend(instances_from_map(comp, c, min_area))
    return out
