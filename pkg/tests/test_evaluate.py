"""Detection metrics, threshold sweep, and best-of-N reranking."""

import numpy as np
import pytest

from prmlab.core import StepProbabilities, make_trajectory
from prmlab.evaluate import (
    DEFAULT_SWEEP_GRID,
    DEFAULT_THRESHOLD,
    BonCandidate,
    BonProblem,
    bon_accuracy,
    bon_select,
    harmonic_f1,
    predict_first_error,
    prediction_log,
    processbench_f1,
    report_from_log,
    sweep_threshold,
)


def _trace(tid, n_steps, first_error):
    return make_trajectory(
        tid,
        [["tok"] for _ in range(n_steps)],
        outcome=0 if first_error is not None else 1,
        gold_first_error=first_error,
    )


def test_defaults():
    assert DEFAULT_THRESHOLD == 0.9
    assert len(DEFAULT_SWEEP_GRID) == 19
    assert DEFAULT_SWEEP_GRID[0] == 0.05
    assert DEFAULT_SWEEP_GRID[-1] == 0.95


def test_harmonic_f1_values():
    assert harmonic_f1(1.0, 1.0) == pytest.approx(1.0, abs=0)
    assert harmonic_f1(0.0, 1.0) == 0.0
    assert harmonic_f1(0.0, 0.0) == 0.0
    # 2 * 0.638 * 0.886 / (0.638 + 0.886) = 0.741821...
    assert harmonic_f1(0.638, 0.886) == pytest.approx(0.7418, abs=5e-4)


def test_predict_first_error_case_study():
    scores = [0.97, 0.99, 0.11, 0.19]
    assert predict_first_error(scores, 0.9) == 3


def test_predict_first_error_none_when_all_clear():
    assert predict_first_error([0.95, 0.92, 0.99], 0.9) is None


def test_predict_first_error_boundary_is_strict():
    # A score exactly at the threshold does not fire.
    assert predict_first_error([0.9, 0.8], 0.9) == 2


def test_predict_accepts_probability_triples():
    probs = [
        StepProbabilities(0.95, 0.03, 0.02),
        StepProbabilities(0.50, 0.25, 0.25),
    ]
    assert predict_first_error(probs, 0.9) == 2


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 1.5])
def test_predict_rejects_out_of_range_threshold(bad):
    with pytest.raises(ValueError, match="threshold"):
        predict_first_error([0.5], bad)


@pytest.fixture
def small_eval_set():
    traces = [
        _trace("e1", 4, 3),
        _trace("e2", 3, 1),
        _trace("e3", 5, 5),
        _trace("c1", 3, None),
        _trace("c2", 4, None),
    ]
    scores = [
        [0.97, 0.99, 0.11, 0.19],  # exact hit at 3
        [0.95, 0.10, 0.10],        # miss: fires at 2, gold 1
        [0.99, 0.98, 0.97, 0.96, 0.30],  # exact hit at 5
        [0.99, 0.95, 0.93],        # clean, no fire
        [0.99, 0.50, 0.99, 0.99],  # clean but fires at 2
    ]
    return traces, scores


def test_processbench_f1_small_case(small_eval_set):
    traces, scores = small_eval_set
    rep = processbench_f1(traces, scores, 0.9)
    assert rep.n_error == 3
    assert rep.n_correct == 2
    assert rep.error_accuracy == pytest.approx(2.0 / 3.0, abs=0)
    assert rep.correct_accuracy == pytest.approx(0.5, abs=0)
    assert rep.f1 == pytest.approx(harmonic_f1(2.0 / 3.0, 0.5), abs=1e-12)
    assert rep.threshold == 0.9


def test_report_recomputable_from_log(small_eval_set):
    traces, scores = small_eval_set
    log = prediction_log(traces, scores, 0.9)
    assert [r["id"] for r in log] == ["e1", "e2", "e3", "c1", "c2"]
    assert [r["predicted"] for r in log] == [3, 2, 5, None, 2]
    assert [r["gold"] for r in log] == [3, 1, 5, None, None]
    assert log[0]["last_step_right_score"] == pytest.approx(0.19, abs=0)
    assert report_from_log(log, 0.9) == processbench_f1(traces, scores, 0.9)


def test_prediction_log_validates_shapes(small_eval_set):
    traces, scores = small_eval_set
    with pytest.raises(ValueError, match="length mismatch"):
        prediction_log(traces[:2], scores, 0.9)
    with pytest.raises(ValueError, match="scores for"):
        prediction_log(traces[:1], [[0.9]], 0.9)


def test_degenerate_classes():
    errs = [_trace("e", 2, 1)]
    rep = processbench_f1(errs, [[0.1, 0.1]], 0.9)
    assert rep.error_accuracy == 1.0
    assert rep.correct_accuracy is None
    assert rep.f1 == 0.0
    clean = [_trace("c", 2, None)]
    rep = processbench_f1(clean, [[0.99, 0.99]], 0.9)
    assert rep.error_accuracy is None
    assert rep.correct_accuracy == 1.0
    assert rep.f1 == 0.0


def test_sweep_shape_and_monotone_correct_accuracy(small_eval_set):
    traces, scores = small_eval_set
    rows, best = sweep_threshold(traces, scores)
    assert len(rows) == 19
    assert [r.threshold for r in rows] == list(DEFAULT_SWEEP_GRID)
    # Raising the threshold can only flag more steps, so accuracy on the
    # clean class never increases along the grid.
    cas = [r.correct_accuracy for r in rows]
    for lo, hi in zip(cas, cas[1:]):
        assert hi <= lo
    assert best in DEFAULT_SWEEP_GRID
    best_f1 = max(r.f1 for r in rows)
    assert next(r for r in rows if r.threshold == best).f1 == best_f1


def test_sweep_tie_breaks_toward_smaller_threshold():
    # Scores sit far from every grid point, so all thresholds in a wide
    # band produce identical predictions and tie on f1.
    traces = [_trace("e", 2, 2), _trace("c", 2, None)]
    scores = [[0.999, 0.001], [0.999, 0.998]]
    rows, best = sweep_threshold(traces, scores)
    assert all(r.f1 == 1.0 for r in rows)
    assert best == 0.05


def test_sweep_rejects_empty_grid(small_eval_set):
    traces, scores = small_eval_set
    with pytest.raises(ValueError, match="non-empty"):
        sweep_threshold(traces, scores, thresholds=())


def test_bon_select_examples():
    assert bon_select([[0.2, 0.9], [0.5, 0.4]]) == 1
    assert bon_select([[0.2, 0.3], [0.5, 0.8]]) == 2
    # Only the final step matters.
    assert bon_select([[0.99, 0.5], [0.01, 0.6]]) == 2


def test_bon_select_tie_breaks_low():
    assert bon_select([[0.7], [0.7], [0.7]]) == 1


def test_bon_select_rejects_degenerate_input():
    with pytest.raises(ValueError, match="non-empty"):
        bon_select([])
    with pytest.raises(ValueError, match="candidate 2 has no steps"):
        bon_select([[0.5], []])


def _problem(pid, finals, correct):
    return BonProblem(
        problem_id=pid,
        candidates=tuple(
            BonCandidate(right_scores=(0.5, f), is_correct=bool(c))
            for f, c in zip(finals, correct)
        ),
    )


def test_bon_accuracy_oracle_scorer():
    # A scorer that ranks every correct candidate above every wrong one
    # achieves accuracy 1 at any n that includes a correct candidate.
    problems = [
        _problem("p1", [0.9, 0.1, 0.2, 0.1], [1, 0, 0, 0]),
        _problem("p2", [0.2, 0.8, 0.3, 0.9], [0, 1, 0, 1]),
    ]
    acc = bon_accuracy(problems, [2, 4])
    assert acc == {2: 1.0, 4: 1.0}


def test_bon_accuracy_counts_hits():
    problems = [
        _problem("p1", [0.9, 0.1], [0, 1]),  # picks 1, wrong
        _problem("p2", [0.9, 0.1], [1, 0]),  # picks 1, right
    ]
    assert bon_accuracy(problems, [1, 2]) == {1: 0.5, 2: 0.5}


def test_bon_accuracy_prefix_semantics():
    # n selects the first n candidates in file order, not the best n.
    problems = [_problem("p", [0.1, 0.9], [1, 0])]
    assert bon_accuracy(problems, [1]) == {1: 1.0}
    assert bon_accuracy(problems, [2]) == {2: 0.0}


def test_bon_accuracy_errors():
    problems = [_problem("p", [0.5], [1])]
    with pytest.raises(ValueError, match="non-empty"):
        bon_accuracy([], [1])
    with pytest.raises(ValueError, match="n must be >= 1"):
        bon_accuracy(problems, [0])
    with pytest.raises(ValueError, match="has 1 candidates, need 2"):
        bon_accuracy(problems, [2])


def test_scores_accept_numpy_rows(small_eval_set):
    traces, scores = small_eval_set
    np_scores = [np.asarray(s) for s in scores]
    assert processbench_f1(traces, np_scores, 0.9) == processbench_f1(traces, scores, 0.9)
