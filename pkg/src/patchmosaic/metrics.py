"""Confusion-matrix segmentation metrics and a weighted cross-entropy loss.

The confusion matrix is the single substrate: accuracy, per-class IoU,
and mIoU all derive from it, and matrices merge by addition so per-tile
results can be computed concurrently and reduced in any order.

The loss side implements mean-over-pixels weighted cross entropy with
optional L1/L2 regularization, plus its analytic gradient with respect
to logits so the formula can be verified against finite differences.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, SizeError

# Probabilities are clamped to at least this before the log; the loss is
# undefined at p = 0.
LOG_EPS = 1e-12

# Per-pixel distributions must sum to 1 within this tolerance.
NORMALIZATION_TOL = 1e-9

REG_KINDS = ("l1", "l2")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Pixel counts indexed [ground_truth, predicted]."""

    counts: np.ndarray  # (C, C) int64
    num_classes: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.shape != (self.num_classes, self.num_classes):
            raise ValueError(
                f"counts must be ({self.num_classes}, {self.num_classes}), got {counts.shape}"
            )
        if not np.issubdtype(counts.dtype, np.integer):
            raise ValueError(f"counts dtype must be integer, got {counts.dtype}")
        if counts.size and int(counts.min()) < 0:
            raise ValueError("counts must be non-negative")
        counts = np.ascontiguousarray(counts.astype(np.int64))
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge confusion matrices of different class counts")
        return ConfusionMatrix(
            counts=self.counts + other.counts, num_classes=self.num_classes
        )


def zero_confusion(num_classes: int) -> ConfusionMatrix:
    return ConfusionMatrix(
        counts=np.zeros((num_classes, num_classes), dtype=np.int64),
        num_classes=num_classes,
    )


def confusion(
    pred: np.ndarray,
    gt: np.ndarray,
    num_classes: int,
    ignore_index: int | None = None,
) -> ConfusionMatrix:
    """Tally the confusion matrix of a predicted map against ground truth.

    Pixels whose ground truth equals ``ignore_index`` are excluded;
    every counted value must be < num_classes.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise SizeError(f"pred {pred.shape} and gt {gt.shape} dimensions differ")
    if not np.issubdtype(pred.dtype, np.integer) or not np.issubdtype(gt.dtype, np.integer):
        raise ValueError("pred and gt must be integer arrays")
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    p = pred.ravel().astype(np.int64)
    g = gt.ravel().astype(np.int64)
    if ignore_index is not None:
        keep = g != ignore_index
        p = p[keep]
        g = g[keep]
    for name, arr in (("pred", p), ("gt", g)):
        if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= num_classes):
            raise ValueError(
                f"{name} contains class values outside [0, {num_classes})"
            )
    flat = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return ConfusionMatrix(
        counts=flat.reshape(num_classes, num_classes), num_classes=num_classes
    )


def iou_per_class(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-class intersection over union, with presence flags.

    IoU_c = TP_c / (TP_c + FP_c + FN_c). A class with that denominator
    equal to zero never occurs in ground truth or predictions; it is
    flagged absent and its IoU slot is 0.
    """
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = tp + fp + fn
    present = denom > 0
    iou = np.zeros(cm.num_classes, dtype=np.float64)
    np.divide(tp, denom, out=iou, where=present)
    return iou, present


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over present classes only (absent classes are excluded)."""
    iou, present = iou_per_class(cm)
    if not present.any():
        raise EvaluationError("no class is present; mIoU is undefined")
    return float(iou[present].mean())


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EvaluationError("no pixels evaluated; accuracy is undefined")
    return float(np.trace(cm.counts) / total)


# ---------------------------------------------------------------------------
# Weighted cross entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossParams:
    """Class weights plus optional parameter regularization."""

    class_weights: np.ndarray  # (C,) float64, non-negative
    reg_strength: float = 0.0
    reg_kind: str = "l2"

    def __post_init__(self) -> None:
        w = np.asarray(self.class_weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError(f"class_weights must be a non-empty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("class_weights must be finite and non-negative")
        if self.reg_strength < 0:
            raise ValueError(f"reg_strength must be >= 0, got {self.reg_strength}")
        if self.reg_kind not in REG_KINDS:
            raise ValueError(f"reg_kind must be one of {REG_KINDS}, got {self.reg_kind!r}")
        w = np.ascontiguousarray(w)
        w.setflags(write=False)
        object.__setattr__(self, "class_weights", w)

    @property
    def num_classes(self) -> int:
        return self.class_weights.size


def uniform_loss_params(num_classes: int) -> LossParams:
    """w_i = 1 for every class, no regularization."""
    return LossParams(class_weights=np.ones(num_classes, dtype=np.float64))


def _regularizer(params: LossParams, theta: np.ndarray | None) -> float:
    if params.reg_strength == 0.0:
        return 0.0
    if theta is None:
        raise ValueError("theta is required when reg_strength > 0")
    t = np.asarray(theta, dtype=np.float64).ravel()
    if params.reg_kind == "l1":
        r = float(np.abs(t).sum())
    else:
        r = float((t * t).sum())
    return params.reg_strength * r


def _flatten_probs(probs: np.ndarray, gt: np.ndarray, params: LossParams):
    probs = np.asarray(probs, dtype=np.float64)
    gt = np.asarray(gt)
    if probs.ndim < 1 or probs.shape[-1] != params.num_classes:
        raise ValueError(
            f"probs must have a trailing axis of {params.num_classes} classes, "
            f"got shape {probs.shape}"
        )
    if probs.shape[:-1] != gt.shape:
        raise SizeError(
            f"probs pixels {probs.shape[:-1]} and gt {gt.shape} dimensions differ"
        )
    if not np.issubdtype(gt.dtype, np.integer):
        raise ValueError("gt must be an integer array")
    flat = probs.reshape(-1, params.num_classes)
    g = gt.ravel().astype(np.int64)
    if g.size == 0:
        raise EvaluationError("no pixels to score")
    if int(g.min()) < 0 or int(g.max()) >= params.num_classes:
        raise ValueError(f"gt contains class values outside [0, {params.num_classes})")
    return flat, g


def weighted_ce(
    probs: np.ndarray,
    gt: np.ndarray,
    params: LossParams,
    theta: np.ndarray | None = None,
) -> float:
    """Weighted cross entropy, mean over pixels, plus regularization.

    ``probs`` holds one probability distribution per pixel on its
    trailing axis; each must be non-negative and sum to 1 within 1e-9.
    The loss is mean_i(-w_{gt_i} * log(max(p_i[gt_i], 1e-12))) plus
    reg_strength * R(theta), R being the L1 or squared-L2 norm.
    """
    flat, g = _flatten_probs(probs, gt, params)
    if np.any(flat < 0):
        raise ValueError("probs must be non-negative")
    sums = flat.sum(axis=1)
    worst = float(np.abs(sums - 1.0).max())
    if worst > NORMALIZATION_TOL:
        raise ValueError(
            f"per-pixel probabilities must sum to 1 +/- {NORMALIZATION_TOL}, "
            f"worst deviation {worst:.3e}"
        )
    p_gt = flat[np.arange(g.size), g]
    w_gt = params.class_weights[g]
    data_term = float(np.mean(-w_gt * np.log(np.maximum(p_gt, LOG_EPS))))
    return data_term + _regularizer(params, theta)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the trailing axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def ce_gradient(logits: np.ndarray, gt: np.ndarray, params: LossParams) -> np.ndarray:
    """Gradient of ``weighted_ce(softmax(logits), gt, params)`` w.r.t. logits.

    For pixel i with distribution p = softmax(z_i) and true class g,
    d loss / d z_i = w_g * (p - onehot(g)) / N, N being the pixel count
    (the loss is a mean over pixels). Regularization does not touch
    logits, so it contributes nothing here.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    flat, g = _flatten_probs(z, gt, params)
    p = softmax(flat)
    n = g.size
    grad = p * params.class_weights[g][:, None]
    grad[np.arange(n), g] -= params.class_weights[g]
    grad /= n
    return grad.reshape(z.shape)
