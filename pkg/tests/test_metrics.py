import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dappr.errors import DegenerateAlphaError, MetricUndefinedError
from dappr.metrics import (
    ECE_BINS,
    aleatoric_uncertainty,
    aupr,
    auroc,
    ece,
    epistemic_uncertainty,
    reliability_bins,
    softmax_entropy,
)
from dappr.possibility import DirichletParams, SimplexPoint

from oracles import pairwise_auroc, rank_walk_average_precision


# ---------------------------------------------------------------------------
# uncertainty decomposition


def test_uncertainty_split_frozen():
    d = DirichletParams(np.array([8.0, 1.0, 1.0]))
    assert aleatoric_uncertainty(d) == pytest.approx(0.2, abs=1e-15)
    assert epistemic_uncertainty(d) == pytest.approx(0.3, abs=1e-15)


def test_uncertainty_degenerate_alpha():
    flat = DirichletParams(np.array([0.0, 0.0]))
    with pytest.raises(DegenerateAlphaError):
        aleatoric_uncertainty(flat)
    with pytest.raises(DegenerateAlphaError):
        epistemic_uncertainty(flat)


def test_epistemic_shrinks_with_evidence():
    lo = epistemic_uncertainty(DirichletParams(np.array([2.0, 2.0])))
    hi = epistemic_uncertainty(DirichletParams(np.array([200.0, 200.0])))
    assert hi < lo


def test_softmax_entropy():
    assert softmax_entropy(SimplexPoint(np.full(4, 0.25))) == pytest.approx(
        math.log(4), abs=1e-15)
    assert softmax_entropy(SimplexPoint(np.array([1.0, 0.0, 0.0]))) == 0.0


# ---------------------------------------------------------------------------
# ranking metrics


def test_aupr_frozen_example():
    # positives at ranks 1 and 3 of the descending walk
    value = aupr([1, 0, 1], [3.0, 2.0, 1.0])
    assert value == 0.8333333333333333
    assert value == rank_walk_average_precision([1, 0, 1], [3.0, 2.0, 1.0])


def test_aupr_perfect_and_worst():
    assert aupr([1, 1, 0, 0], [4, 3, 2, 1]) == 1.0
    assert aupr([0, 0, 1], [3, 2, 1]) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_aupr_tie_uses_original_order():
    # tied scores keep input order, so the negative at index 0 ranks first
    assert aupr([0, 1], [0.5, 0.5]) == 0.5
    assert aupr([1, 0], [0.5, 0.5]) == 1.0


def test_ranking_metrics_undefined_cases():
    for bad_labels, bad_scores in ([[], []], [[1, 1], [0.1, 0.2]], [[0, 0], [0.1, 0.2]]):
        with pytest.raises(MetricUndefinedError):
            aupr(bad_labels, bad_scores)
        with pytest.raises(MetricUndefinedError):
            auroc(bad_labels, bad_scores)
    with pytest.raises(ValueError):
        auroc([0, 1], [0.1])
    with pytest.raises(ValueError):
        aupr([0, 2], [0.1, 0.2])


def test_auroc_basics():
    assert auroc([0, 1], [0.1, 0.9]) == 1.0
    assert auroc([0, 1], [0.9, 0.1]) == 0.0
    assert auroc([0, 1], [0.5, 0.5]) == 0.5
    # one tie pair among four: 3 wins + 0.5 over 4 pairs
    assert auroc([0, 0, 1, 1], [1, 2, 2, 3]) == pytest.approx(0.875, abs=1e-15)


def test_ranking_matches_pairwise_oracle_exactly():
    rng = np.random.default_rng(42)
    done = 0
    while done < 50:
        n = int(rng.integers(2, 9))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            continue
        scores = rng.integers(0, 5, size=n).astype(np.float64)
        assert auroc(labels, scores) == pairwise_auroc(labels, scores)
        assert aupr(labels, scores) == rank_walk_average_precision(labels, scores)
        done += 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(-20, 20)), min_size=2,
                max_size=12))
def test_ranking_invariant_to_monotone_rescale(pairs):
    labels = [l for l, _ in pairs]
    if 0 not in labels or 1 not in labels:
        return
    scores = np.array([s for _, s in pairs], dtype=np.float64)
    mapped = 3.0 * scores - 7.0  # exact for small integers
    assert auroc(labels, scores) == auroc(labels, mapped)
    assert aupr(labels, scores) == aupr(labels, mapped)


# ---------------------------------------------------------------------------
# calibration


def test_ece_hand_example():
    conf = [0.05, 0.95, 0.95, 0.65]
    correct = [1, 1, 0, 1]
    # bins 0, 14, 14, 9: gaps 0.95, 0.45, 0.35 with weights 1/4, 2/4, 1/4
    want = 0.25 * 0.95 + 0.5 * 0.45 + 0.25 * 0.35
    assert ece(conf, correct) == pytest.approx(want, abs=1e-12)


def test_ece_perfect_calibration_is_zero():
    assert ece([1.0, 1.0], [1, 1]) == 0.0
    assert ece([0.5, 0.5], [1, 0]) == pytest.approx(0.0, abs=1e-15)


def test_ece_empty_warns_and_returns_zero(caplog):
    with caplog.at_level(logging.WARNING, logger="dappr"):
        assert ece([], []) == 0.0
    assert any("empty" in rec.message for rec in caplog.records)


def test_ece_validation():
    with pytest.raises(ValueError):
        ece([1.2], [1])
    with pytest.raises(ValueError):
        ece([0.5], [2])
    with pytest.raises(ValueError):
        ece([0.5, 0.5], [1])


def test_reliability_bins_shape_and_clamp():
    bins = reliability_bins([1.0, 0.0, 0.001], [1, 0, 0])
    assert bins.n_bins == ECE_BINS
    assert bins.counts.sum() == 3
    assert bins.counts[-1] == 1  # confidence 1.0 clamps into the top bin
    assert bins.counts[0] == 2
    assert bins.bin_edges[0] == 0.0 and bins.bin_edges[-1] == 1.0
    rows = list(bins.rows())
    assert len(rows) == ECE_BINS
    assert rows[-1][2] == 1.0 and rows[-1][3] == 1.0


def test_reliability_bins_csv_blanks_empty_bins(tmp_path):
    bins = reliability_bins([0.5], [1])
    path = tmp_path / "bins.csv"
    bins.save_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "bin_low,bin_high,mean_conf,accuracy,count"
    assert len(lines) == 1 + ECE_BINS
    empties = [ln for ln in lines[1:] if ln.endswith(",,,0")]
    assert len(empties) == ECE_BINS - 1
    full = [ln for ln in lines[1:] if not ln.endswith(",0")]
    assert len(full) == 1 and full[0].endswith("0.5,1.0,1")
