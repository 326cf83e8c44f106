"""Binary classification metrics for imbalanced data.

AUC is the rank statistic with ties given half credit, so constant
scores land exactly at 0.5. MCC returns 0 whenever its denominator is
0. F1 is 0 when there are no true positives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, SingleClassError
from .validation import as_label_vector


@dataclass
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class Metrics:
    f1: float
    mcc: float
    auc: float
    accuracy: float
    threshold: float


def confusion(scores, labels, threshold=0.5) -> Confusion:
    """Counts with the decision rule: predict positive iff score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = as_label_vector(labels)
    if scores.ndim != 1 or len(scores) != len(labels):
        raise LengthMismatchError(
            f"scores ({scores.shape}) and labels ({labels.shape}) must align"
        )
    if len(scores) == 0:
        raise LengthMismatchError("need at least one example")
    pred = scores >= threshold
    pos = labels == 1
    return Confusion(
        tp=int(np.count_nonzero(pred & pos)),
        fp=int(np.count_nonzero(pred & ~pos)),
        tn=int(np.count_nonzero(~pred & ~pos)),
        fn=int(np.count_nonzero(~pred & pos)),
    )


def f1_score(c: Confusion) -> float:
    if c.tp == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 2.0 * precision * recall / (precision + recall)


def mcc_score(c: Confusion) -> float:
    denom = (
        (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    )
    if denom == 0:
        return 0.0
    num = c.tp * c.tn - c.fp * c.fn
    return num / np.sqrt(float(denom))


def accuracy_score(c: Confusion) -> float:
    return (c.tp + c.tn) / c.n


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_score(scores, labels) -> float:
    """Probability a positive outranks a negative, ties counting 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = as_label_vector(labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs both classes")
    ranks = _midranks(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(scores, labels, threshold=0.5) -> Metrics:
    """All four metrics at one decision threshold.

    Raises SingleClassError when only one class is present; the error's
    ``partial`` dict still carries f1/accuracy, which stay defined.
    """
    c = confusion(scores, labels, threshold)
    f1 = f1_score(c)
    acc = accuracy_score(c)
    labels_arr = as_label_vector(labels)
    if labels_arr.min() == labels_arr.max():
        raise SingleClassError(
            "AUC/MCC are undefined with a single class",
            partial={"f1": f1, "accuracy": acc, "threshold": threshold},
        )
    return Metrics(
        f1=f1,
        mcc=float(mcc_score(c)),
        auc=float(auc_score(scores, labels_arr)),
        accuracy=acc,
        threshold=threshold,
    )


def write_metrics_csv(path, rows) -> None:
    """rows: iterable of (method_name, Metrics)."""
    with open(path, "w") as fh:
        fh.write("method,threshold,f1,mcc,auc,accuracy\n")
        for method, m in rows:
            fh.write(
                f"{method},{repr(m.threshold)},{repr(m.f1)},{repr(m.mcc)},"
                f"{repr(m.auc)},{repr(m.accuracy)}\n"
            )
