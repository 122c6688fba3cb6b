"""Evaluation metrics, average ranks, win/tie/loss counts and the Wilcoxon signed-rank test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    return t, p


def accuracy(y_true, y_pred) -> float:
    t, p = _pair(y_true, y_pred)
    if t.size == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(t == p))


def f1_for_label(y_true, y_pred, label: int) -> float:
    """Binary F1 treating ``label`` as the positive class; 0 when undefined."""
    t, p = _pair(y_true, y_pred)
    tp = np.sum((t == label) & (p == label))
    fp = np.sum((t != label) & (p == label))
    fn = np.sum((t == label) & (p != label))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def f_macro(y_true, y_pred, n_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1 over the classes present in ``y_true``."""
    t, p = _pair(y_true, y_pred)
    classes = np.unique(t)
    if n_classes is not None and classes.size and (classes.min() < 0 or classes.max() >= n_classes):
        raise ValueError("labels outside [0, n_classes)")
    return float(np.mean([f1_for_label(t, p, c) for c in classes]))


def confusion_matrix(y_true, y_pred, n_classes: int | None = None) -> np.ndarray:
    t, p = _pair(y_true, y_pred)
    t = t.astype(np.int64)
    p = p.astype(np.int64)
    L = n_classes if n_classes is not None else int(max(t.max(initial=0), p.max(initial=0))) + 1
    C = np.zeros((L, L), dtype=np.int64)
    np.add.at(C, (t, p), 1)
    return C


def mcc(y_true, y_pred) -> float:
    """Multiclass Matthews correlation (covariance form); 0 when the denominator vanishes."""
    C = confusion_matrix(y_true, y_pred).astype(float)
    s = C.sum()
    c = np.trace(C)
    t_k = C.sum(axis=1)
    p_k = C.sum(axis=0)
    num = c * s - t_k @ p_k
    # one square root of the (integer-valued) product keeps perfect agreement at exactly 1
    den = math.sqrt((s * s - p_k @ p_k) * (s * s - t_k @ t_k))
    return float(num / den) if den else 0.0


METRICS = {
    "accuracy": lambda t, p, L: accuracy(t, p),
    "f_score": lambda t, p, L: f_macro(t, p, L),
    "mcc": lambda t, p, L: mcc(t, p),
}


# --------------------------------------------------------------------------- tables and ranks


@dataclass(frozen=True)
class ScoreTable:
    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    values: np.ndarray  # (methods, datasets), higher is better

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.methods), len(self.datasets)):
            raise ValueError("values shape must be (methods, datasets)")
        if np.isnan(v).any():
            raise ValueError("score table has missing cells")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "datasets", tuple(self.datasets))

    def row(self, method: str) -> np.ndarray:
        try:
            return self.values[self.methods.index(method)]
        except ValueError:
            raise KeyError(f"unknown method {method!r}") from None


def rank_matrix(table: ScoreTable) -> np.ndarray:
    """Per-dataset ranks (1 = best, ties averaged), shape (methods, datasets)."""
    return np.column_stack([rankdata(-table.values[:, j], method="average") for j in range(len(table.datasets))])


def average_ranks(table: ScoreTable) -> np.ndarray:
    return rank_matrix(table).mean(axis=1)


def win_tie_loss(control: str, other: str, table: ScoreTable) -> tuple[int, int, int]:
    a, b = table.row(control), table.row(other)
    return int(np.sum(a > b)), int(np.sum(a == b)), int(np.sum(a < b))


# --------------------------------------------------------------------------- Wilcoxon


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    alternative: str
    exact: bool


EXACT_MAX_N = 15


def _signed_rank_null(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null distribution of the doubled positive-rank sum: counts[s] = #sign patterns with sum s."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks.astype(np.int64):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(x, y, alternative: str = "greater", zero_method: str = "wilcox") -> WilcoxonResult:
    """Paired signed-rank test of ``x`` against ``y``.

    ``alternative="greater"`` asks whether ``x`` tends to exceed ``y``. With at
    most 15 non-zero differences the p-value comes from the exact permutation
    distribution (average ranks for ties); beyond that a normal approximation
    with tie and continuity corrections is used.
    """
    if alternative not in ("greater", "two_sided"):
        raise ValueError("alternative must be 'greater' or 'two_sided'")
    if zero_method not in ("wilcox", "pratt"):
        raise ValueError("zero_method must be 'wilcox' or 'pratt'")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 pairs")
    d = x - y
    if zero_method == "wilcox":
        d = d[d != 0]
        ranks = rankdata(np.abs(d))
    else:
        ranks = rankdata(np.abs(d))
        ranks, d = ranks[d != 0], d[d != 0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, alternative, True)
    w = float(ranks[d > 0].sum())

    doubled = np.rint(2 * ranks)
    if n <= EXACT_MAX_N and np.allclose(doubled, 2 * ranks):
        counts = _signed_rank_null(doubled)
        probs = counts / counts.sum()
        s = int(round(2 * w))
        upper = float(probs[s:].sum())
        if alternative == "greater":
            p = upper
        else:
            lower = float(probs[: s + 1].sum())
            p = min(1.0, 2 * min(upper, lower))
        return WilcoxonResult(w, min(p, 1.0), n, alternative, True)

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (w - mean - 0.5) / sd
        p = 0.5 * math.erfc(z / math.sqrt(2))
    else:
        z = (abs(w - mean) - 0.5) / sd
        p = min(1.0, math.erfc(z / math.sqrt(2)))
    return WilcoxonResult(w, p, n, alternative, False)


def mean_table(records: Sequence[tuple[str, str, float]], methods: Sequence[str], datasets: Sequence[str]) -> ScoreTable:
    """Build a ScoreTable from ``(method, dataset, value)`` triples by averaging duplicates."""
    sums = np.zeros((len(methods), len(datasets)))
    counts = np.zeros_like(sums)
    mi = {m: i for i, m in enumerate(methods)}
    di = {d: j for j, d in enumerate(datasets)}
    for m, ds, v in records:
        sums[mi[m], di[ds]] += v
        counts[mi[m], di[ds]] += 1
    with np.errstate(invalid="ignore"):
        return ScoreTable(tuple(methods), tuple(datasets), sums / counts)
