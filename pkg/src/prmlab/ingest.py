"""Dataset I/O: the line-delimited trajectory format and the step splitter.

One JSON object per line. Each record carries an id, an outcome bit, an
optional 1-based first-error index, and exactly one of:

  steps    list of step strings, tokens joined by single spaces
  solution raw text to be split on the five-newline separator

Serialization is canonical (fixed key order, integers only, newline
terminated) so that write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from typing import Iterable, Optional

from .core import Trajectory, make_trajectory

# The step separator is exactly five consecutive newline characters.
STEP_SEPARATOR = "\n\n\n\n\n"


def split_solution(text: str) -> list[str]:
    """Split raw solution text into step strings.

    Splits on the exact five-newline separator, strips surrounding
    whitespace from each segment, and drops segments that end up empty.
    """
    steps = [seg.strip() for seg in text.split(STEP_SEPARATOR)]
    steps = [s for s in steps if s]
    if not steps:
        raise ValueError("no steps found")
    return steps


def _record_to_trajectory(rec: dict, line_no: int) -> Trajectory:
    def fail(msg: str) -> ValueError:
        return ValueError(f"line {line_no}: {msg}")

    if not isinstance(rec, dict):
        raise fail("record is not an object")
    if "id" not in rec or not isinstance(rec["id"], str):
        raise fail("missing or non-string 'id'")
    has_steps = "steps" in rec
    has_solution = "solution" in rec
    if has_steps and has_solution:
        raise fail("both 'steps' and 'solution' present")
    if not has_steps and not has_solution:
        raise fail("neither 'steps' nor 'solution' present")
    if has_steps:
        steps = rec["steps"]
        if not isinstance(steps, list) or not all(isinstance(s, str) for s in steps):
            raise fail("'steps' must be an array of strings")
    else:
        if not isinstance(rec["solution"], str):
            raise fail("'solution' must be a string")
        try:
            steps = split_solution(rec["solution"])
        except ValueError as exc:
            raise fail(str(exc)) from exc
    if rec.get("outcome") not in (0, 1):
        raise fail(f"'outcome' must be 0 or 1, got {rec.get('outcome')!r}")
    first_error = rec.get("first_error")
    if first_error is not None and not isinstance(first_error, int):
        raise fail(f"'first_error' must be an integer or null, got {first_error!r}")
    try:
        return make_trajectory(
            rec["id"],
            [s.split() for s in steps],
            outcome=rec["outcome"],
            gold_first_error=first_error,
        )
    except ValueError as exc:
        raise fail(str(exc)) from exc


def read_dataset(path: str) -> list[Trajectory]:
    """Parse and validate every record; errors carry the 1-based line number."""
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON: {exc}") from exc
            traces.append(_record_to_trajectory(rec, line_no))
    return traces


def trajectory_to_record(t: Trajectory) -> dict:
    """Canonical record: fixed key order, first_error always present."""
    for s in t.steps:
        for tok in s.tokens:
            # Tokens are space-joined on disk; a token containing
            # whitespace (or nothing) would not survive the round-trip.
            if not tok or tok.split() != [tok]:
                raise ValueError(f"unserializable token {tok!r} in {t.id!r}")
    return {
        "id": t.id,
        "steps": [" ".join(s.tokens) for s in t.steps],
        "outcome": t.outcome,
        "first_error": t.gold_first_error,
    }


def write_dataset(traces: Iterable[Trajectory], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in traces:
            fh.write(json.dumps(trajectory_to_record(t), separators=(",", ":")))
            fh.write("\n")


def write_jsonl(records: Iterable[dict], path: str) -> None:
    """One compact JSON object per line, insertion key order preserved."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON: {exc}") from exc
    return records


def read_bon_problems(path: str) -> list[dict]:
    """Parse a best-of-N candidate file into problem groups.

    Input records: {problem_id, candidate_index, steps, is_correct}.
    Returns one dict per problem, candidates ordered by candidate_index:
    {problem_id, step_lists: list of token-list lists, is_correct: list of 0|1}.
    """
    by_problem: dict[str, list[tuple[int, list[list[str]], int]]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {line_no}: invalid JSON: {exc}") from exc
            try:
                pid = rec["problem_id"]
                cidx = rec["candidate_index"]
                steps = rec["steps"]
                correct = rec["is_correct"]
            except (KeyError, TypeError) as exc:
                raise ValueError(f"line {line_no}: missing field {exc}") from exc
            if not isinstance(steps, list) or not steps:
                raise ValueError(f"line {line_no}: 'steps' must be a non-empty array")
            if correct not in (0, 1):
                raise ValueError(f"line {line_no}: 'is_correct' must be 0 or 1")
            if pid not in by_problem:
                by_problem[pid] = []
                order.append(pid)
            by_problem[pid].append((cidx, [s.split() for s in steps], correct))
    problems = []
    for pid in order:
        cands = sorted(by_problem[pid], key=lambda c: c[0])
        problems.append(
            {
                "problem_id": pid,
                "step_lists": [c[1] for c in cands],
                "is_correct": [c[2] for c in cands],
            }
        )
    return problems
