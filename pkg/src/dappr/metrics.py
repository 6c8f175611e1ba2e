"""Uncertainty measures and evaluation metrics.

Ranking metrics follow fixed conventions so values are comparable across
runs and against the brute-force oracles in the test suite:

* aupr is non-interpolated average precision: mean of precision at each
  positive, walking the ranking by descending score with ties broken stably
  by original index.
* auroc is the Mann-Whitney U statistic over positive/negative pairs divided
  by n_pos * n_neg, ties counting 1/2.
* ece uses 15 equal-width confidence bins on [0, 1]; empty bins are skipped.

All three return raw values in [0, 1]; report-level scaling to 0-100 happens
in the harness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAlphaError, MetricUndefinedError
from .possibility import DirichletParams, SimplexPoint

log = logging.getLogger("dappr")

ECE_BINS = 15


def aleatoric_uncertainty(d: DirichletParams) -> float:
    """First-order uncertainty 1 - max_k alpha_k / alpha_0, in [0, 1 - 1/K]."""
    if d.alpha0 == 0.0:
        raise DegenerateAlphaError("aleatoric uncertainty undefined for alpha0 == 0")
    return 1.0 - float(d.alpha.max()) / d.alpha0


def epistemic_uncertainty(d: DirichletParams) -> float:
    """Second-order uncertainty K / alpha_0.

    Under the softplus-plus-one head alpha_0 > K, so the value lies in (0, 1)
    and shrinks as total concentration grows.
    """
    if d.alpha0 == 0.0:
        raise DegenerateAlphaError("epistemic uncertainty undefined for alpha0 == 0")
    return d.k / d.alpha0


def softmax_entropy(p: SimplexPoint) -> float:
    """Shannon entropy in nats, with the 0 log 0 = 0 convention."""
    q = p.probs[p.probs > 0.0]
    return float(-np.sum(q * np.log(q)))


def _check_binary(labels, scores):
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1 or s.ndim != 1 or y.size != s.size:
        raise ValueError("labels and scores must be 1-d vectors of equal length")
    if y.size == 0:
        raise MetricUndefinedError("empty input")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be binary (0 or 1)")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 or n_pos == y.size:
        raise MetricUndefinedError("need both positive and negative labels")
    return y.astype(np.int64), s, n_pos


def aupr(labels, scores) -> float:
    """Non-interpolated average precision (higher score = predicted positive)."""
    y, s, n_pos = _check_binary(labels, scores)
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    precision = np.cumsum(hits) / np.arange(1, y.size + 1)
    return float(np.sum(precision[hits == 1]) / n_pos)


def auroc(labels, scores) -> float:
    """Probability a positive outranks a negative, ties counting 1/2."""
    y, s, n_pos = _check_binary(labels, scores)
    n = y.size
    order = np.argsort(s, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[order[j + 1]] == s[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0  # average of 1-based ranks
        i = j + 1
    u = float(np.sum(ranks[y == 1])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * (n - n_pos))


def _check_confidences(confidences, correct):
    c = np.asarray(confidences, dtype=np.float64)
    ok = np.asarray(correct)
    if c.ndim != 1 or ok.ndim != 1 or c.size != ok.size:
        raise ValueError("confidences and correctness must be 1-d vectors of equal length")
    if c.size and (np.any(c < 0.0) or np.any(c > 1.0)):
        raise ValueError("confidences must lie in [0, 1]")
    if not np.all(np.isin(ok, (0, 1))):
        raise ValueError("correctness flags must be binary")
    return c, ok.astype(np.float64)


def _bin_index(confidences: np.ndarray, n_bins: int) -> np.ndarray:
    return np.minimum((confidences * n_bins).astype(np.int64), n_bins - 1)


def ece(confidences, correct, n_bins: int = ECE_BINS) -> float:
    """Expected calibration error over equal-width confidence bins."""
    c, ok = _check_confidences(confidences, correct)
    if c.size == 0:
        log.warning("ece: empty input, returning 0")
        return 0.0
    idx = _bin_index(c, n_bins)
    total = 0.0
    for b in range(n_bins):
        members = idx == b
        n_b = int(np.sum(members))
        if n_b == 0:
            continue
        gap = abs(float(np.mean(ok[members])) - float(np.mean(c[members])))
        total += n_b / c.size * gap
    return total


@dataclass(frozen=True, eq=False)
class ReliabilityBins:
    """Per-bin calibration summary; empty bins carry NaN statistics."""

    bin_edges: np.ndarray
    mean_confidence: np.ndarray
    accuracy: np.ndarray
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return self.counts.size

    def rows(self):
        for b in range(self.n_bins):
            yield (float(self.bin_edges[b]), float(self.bin_edges[b + 1]),
                   float(self.mean_confidence[b]), float(self.accuracy[b]),
                   int(self.counts[b]))

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bin_low,bin_high,mean_conf,accuracy,count\n")
            for lo, hi, conf, acc, count in self.rows():
                conf_s = "" if math.isnan(conf) else repr(conf)
                acc_s = "" if math.isnan(acc) else repr(acc)
                fh.write(f"{lo!r},{hi!r},{conf_s},{acc_s},{count}\n")


def reliability_bins(confidences, correct, n_bins: int = ECE_BINS) -> ReliabilityBins:
    """Bin confidences on [0, 1] and summarise accuracy per bin."""
    c, ok = _check_confidences(confidences, correct)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    mean_conf = np.full(n_bins, np.nan)
    acc = np.full(n_bins, np.nan)
    counts = np.zeros(n_bins, dtype=np.int64)
    if c.size:
        idx = _bin_index(c, n_bins)
        for b in range(n_bins):
            members = idx == b
            counts[b] = int(np.sum(members))
            if counts[b]:
                mean_conf[b] = float(np.mean(c[members]))
                acc[b] = float(np.mean(ok[members]))
    return ReliabilityBins(edges, mean_conf, acc, counts)
