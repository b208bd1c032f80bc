"""Pseudo labels are the outcome copied to every step."""

import numpy as np
from hypothesis import given, strategies as st

from prmlab.core import make_trajectory
from prmlab.pseudolabel import assign_pseudo_labels


def test_positive_outcome():
    t = make_trajectory("t", [["a"], ["b"], ["c"]], outcome=1)
    assert assign_pseudo_labels(t).tolist() == [1, 1, 1]


def test_negative_outcome():
    t = make_trajectory("t", [["a"]] * 5, outcome=0)
    assert assign_pseudo_labels(t).tolist() == [0, 0, 0, 0, 0]


def test_single_step():
    t = make_trajectory("t", [["a"]], outcome=1)
    assert assign_pseudo_labels(t).tolist() == [1]


@given(
    n_steps=st.integers(min_value=1, max_value=30),
    outcome=st.integers(min_value=0, max_value=1),
)
def test_constant_sequence_equal_to_outcome(n_steps, outcome):
    t = make_trajectory("t", [["tok"]] * n_steps, outcome=outcome)
    labels = assign_pseudo_labels(t)
    assert labels.shape == (n_steps,)
    assert labels.dtype == np.int8
    assert np.all(labels == outcome)
