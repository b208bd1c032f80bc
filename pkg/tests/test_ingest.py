"""Line-delimited dataset format: splitter, validation, round-trips."""

import json

import pytest

from prmlab.datagen import GenConfig, generate
from prmlab.ingest import (
    STEP_SEPARATOR,
    read_bon_problems,
    read_dataset,
    read_jsonl,
    split_solution,
    trajectory_to_record,
    write_dataset,
    write_jsonl,
)


def test_separator_is_five_newlines():
    assert STEP_SEPARATOR == "\n" * 5


def test_split_basic():
    text = "step one" + STEP_SEPARATOR + "step two" + STEP_SEPARATOR + "step three"
    assert split_solution(text) == ["step one", "step two", "step three"]


def test_split_strips_and_drops_empty():
    text = "  a  " + STEP_SEPARATOR + "   " + STEP_SEPARATOR + "b\n"
    assert split_solution(text) == ["a", "b"]


def test_split_ten_newlines_is_two_separators():
    # Ten consecutive newlines parse as two separators around an empty
    # middle segment, which is dropped.
    assert split_solution("a" + "\n" * 10 + "b") == ["a", "b"]


def test_split_four_newlines_is_not_a_separator():
    steps = split_solution("a" + "\n" * 4 + "b")
    assert steps == ["a" + "\n" * 4 + "b"]


def test_split_rejects_blank_text():
    with pytest.raises(ValueError, match="no steps found"):
        split_solution("   \n\n   ")


def _write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def test_read_steps_record(tmp_path):
    p = tmp_path / "d.jsonl"
    _write_lines(p, [json.dumps({"id": "t0", "steps": ["a b", "c"], "outcome": 1})])
    traces = read_dataset(str(p))
    assert len(traces) == 1
    assert traces[0].id == "t0"
    assert [s.tokens for s in traces[0].steps] == [("a", "b"), ("c",)]
    assert traces[0].outcome == 1
    assert traces[0].gold_first_error is None


def test_read_solution_record(tmp_path):
    p = tmp_path / "d.jsonl"
    sol = "x y" + STEP_SEPARATOR + "z" + STEP_SEPARATOR + "w w"
    _write_lines(
        p, [json.dumps({"id": "t1", "solution": sol, "outcome": 0, "first_error": 2})]
    )
    t = read_dataset(str(p))[0]
    assert [s.tokens for s in t.steps] == [("x", "y"), ("z",), ("w", "w")]
    assert t.gold_first_error == 2


def test_read_skips_blank_lines(tmp_path):
    p = tmp_path / "d.jsonl"
    _write_lines(p, ["", json.dumps({"id": "t0", "steps": ["a"], "outcome": 1}), "   "])
    assert len(read_dataset(str(p))) == 1


@pytest.mark.parametrize(
    "record, msg",
    [
        ({"steps": ["a"], "outcome": 1}, "missing or non-string 'id'"),
        ({"id": 3, "steps": ["a"], "outcome": 1}, "missing or non-string 'id'"),
        ({"id": "t", "steps": ["a"], "solution": "a", "outcome": 1}, "both 'steps' and 'solution'"),
        ({"id": "t", "outcome": 1}, "neither 'steps' nor 'solution'"),
        ({"id": "t", "steps": "a", "outcome": 1}, "array of strings"),
        ({"id": "t", "steps": [1], "outcome": 1}, "array of strings"),
        ({"id": "t", "solution": 5, "outcome": 1}, "'solution' must be a string"),
        ({"id": "t", "steps": ["a"]}, "'outcome' must be 0 or 1"),
        ({"id": "t", "steps": ["a"], "outcome": 2}, "'outcome' must be 0 or 1"),
        ({"id": "t", "steps": ["a"], "outcome": 1, "first_error": "x"}, "'first_error' must be an integer"),
        ({"id": "t", "steps": ["a"], "outcome": 1, "first_error": 4}, "first-error index out of range"),
        ({"id": "t", "solution": "  ", "outcome": 1}, "no steps found"),
    ],
)
def test_read_rejects_bad_records(tmp_path, record, msg):
    p = tmp_path / "d.jsonl"
    _write_lines(p, [json.dumps(record)])
    with pytest.raises(ValueError, match=msg) as exc:
        read_dataset(str(p))
    assert str(exc.value).startswith("line 1:")


def test_read_reports_line_numbers(tmp_path):
    p = tmp_path / "d.jsonl"
    _write_lines(
        p,
        [
            json.dumps({"id": "ok", "steps": ["a"], "outcome": 1}),
            "{broken json",
        ],
    )
    with pytest.raises(ValueError, match="line 2: invalid JSON"):
        read_dataset(str(p))


def test_roundtrip_is_byte_identical(tmp_path):
    traces = generate(GenConfig(num_traces=100, seed=21))
    p1 = tmp_path / "one.jsonl"
    p2 = tmp_path / "two.jsonl"
    write_dataset(traces, str(p1))
    back = read_dataset(str(p1))
    assert back == traces
    write_dataset(back, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_record_key_order_is_canonical():
    traces = generate(GenConfig(num_traces=1, seed=0))
    rec = trajectory_to_record(traces[0])
    assert list(rec.keys()) == ["id", "steps", "outcome", "first_error"]


def test_record_rejects_unserializable_tokens():
    from prmlab.core import make_trajectory

    t = make_trajectory("t", [["a b"]], outcome=1)
    with pytest.raises(ValueError, match="unserializable token"):
        trajectory_to_record(t)


def test_jsonl_helpers_roundtrip(tmp_path):
    p = tmp_path / "rows.jsonl"
    rows = [{"b": 1, "a": [1, 2]}, {"x": "y"}]
    write_jsonl(rows, str(p))
    assert read_jsonl(str(p)) == rows
    # Insertion key order survives the compact encoding.
    assert p.read_text().splitlines()[0] == '{"b":1,"a":[1,2]}'


def test_bon_grouping(tmp_path):
    p = tmp_path / "bon.jsonl"
    rows = [
        {"problem_id": "q1", "candidate_index": 1, "steps": ["a b", "c"], "is_correct": 0},
        {"problem_id": "q2", "candidate_index": 0, "steps": ["z"], "is_correct": 1},
        {"problem_id": "q1", "candidate_index": 0, "steps": ["d"], "is_correct": 1},
    ]
    write_jsonl(rows, str(p))
    problems = read_bon_problems(str(p))
    assert [pr["problem_id"] for pr in problems] == ["q1", "q2"]
    q1 = problems[0]
    assert q1["step_lists"] == [[["d"]], [["a", "b"], ["c"]]]
    assert q1["is_correct"] == [1, 0]


@pytest.mark.parametrize(
    "row, msg",
    [
        ({"candidate_index": 0, "steps": ["a"], "is_correct": 1}, "missing field"),
        ({"problem_id": "q", "candidate_index": 0, "steps": [], "is_correct": 1}, "non-empty array"),
        ({"problem_id": "q", "candidate_index": 0, "steps": ["a"], "is_correct": 2}, "must be 0 or 1"),
    ],
)
def test_bon_rejects_bad_rows(tmp_path, row, msg):
    p = tmp_path / "bon.jsonl"
    write_jsonl([row], str(p))
    with pytest.raises(ValueError, match=msg):
        read_bon_problems(str(p))
