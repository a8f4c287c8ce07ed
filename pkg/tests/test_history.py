import io

import numpy as np
import pytest

from baradapt.errors import InsufficientWindow
from baradapt.history import (
    HistoryStack,
    estimate_state_derivative,
    fill_with_exact_model_data,
)
from baradapt.model import benchmark_plant, benchmark_trajectory


def test_derivative_exact_for_quadratics():
    # the central difference is exact for polynomials up to degree 2
    t = np.array([0.0, 0.1, 0.2])
    states = np.stack([3.0 * t_**2 - 2.0 * t_ + np.array([1.0, -1.0]) for t_ in t])
    got = estimate_state_derivative(t, states)
    expected = 6.0 * 0.1 - 2.0
    assert np.allclose(got, [expected, expected], rtol=1e-12, atol=1e-12)


def test_derivative_five_point_window_uses_midpoint():
    t = np.linspace(0.0, 0.4, 5)
    states = np.sin(t)[:, None]
    got = estimate_state_derivative(t, states)
    expected = (np.sin(t[3]) - np.sin(t[1])) / (t[3] - t[1])
    assert got[0] == pytest.approx(expected, rel=1e-15)


def test_derivative_window_validation():
    with pytest.raises(InsufficientWindow):
        estimate_state_derivative([0.0, 0.1], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        estimate_state_derivative([0.0, 0.1, 0.3], np.zeros((3, 2)))
    with pytest.raises(ValueError):
        estimate_state_derivative([0.0, 0.1, 0.2], np.zeros((4, 2)))


def test_append_until_capacity():
    stack = HistoryStack(2, 4, capacity=3)
    Y = np.eye(2, 4)
    assert len(stack) == 0
    for k in range(3):
        assert stack.try_insert(Y, np.zeros(2), np.zeros(2))
        assert len(stack) == k + 1


def test_gram_and_cl_term_recomputed_from_entries():
    rng = np.random.default_rng(2)
    stack = HistoryStack(2, 4, capacity=10)
    for _ in range(7):
        stack.try_insert(rng.normal(size=(2, 4)), rng.normal(size=2),
                         rng.normal(size=2))
    gram = np.zeros((4, 4))
    for ent in stack.entries:
        gram += ent.Y.T @ ent.Y
    assert np.allclose(stack.gram, gram, rtol=1e-14, atol=1e-14)
    th = rng.normal(size=4)
    cl = np.zeros(4)
    for ent in stack.entries:
        cl += ent.Y.T @ (ent.xdot_hat - ent.u - ent.Y @ th)
    assert np.allclose(stack.cl_term(th), cl, rtol=1e-12, atol=1e-12)


def test_cl_term_empty_stack_is_zero():
    stack = HistoryStack(2, 4)
    assert np.array_equal(stack.cl_term(np.ones(4)), np.zeros(4))
    assert stack.excitation_level() == 0.0
    assert not stack.assumption_met


def test_swap_accepts_only_improvements():
    stack = HistoryStack(2, 2, capacity=2)
    # two aligned entries leave the second direction unexcited
    weak = np.array([[1.0, 0.0], [0.0, 0.0]])
    stack.try_insert(weak, np.zeros(2), np.zeros(2))
    stack.try_insert(weak, np.zeros(2), np.zeros(2))
    assert stack.excitation_level() == 0.0
    # an orthogonal candidate fills the gap and must be accepted
    strong = np.array([[0.0, 1.0], [1.0, 0.0]])
    before = stack.excitation_level()
    assert stack.try_insert(strong, np.zeros(2), np.zeros(2))
    assert stack.excitation_level() > before
    # re-offering the weak entry cannot improve and must be refused
    level = stack.excitation_level()
    assert not stack.try_insert(weak, np.zeros(2), np.zeros(2))
    assert stack.excitation_level() == level


def test_excitation_never_decreases_under_random_inserts():
    rng = np.random.default_rng(23)
    stack = HistoryStack(2, 4, capacity=5)
    prev = stack.excitation_level()
    for _ in range(300):
        scale = rng.choice([0.01, 1.0, 10.0])
        stack.try_insert(scale * rng.normal(size=(2, 4)), rng.normal(size=2),
                         rng.normal(size=2))
        level = stack.excitation_level()
        assert level >= prev
        prev = level


def test_assumption_threshold():
    stack = HistoryStack(2, 2, capacity=4, min_eig_threshold=0.5)
    stack.try_insert(0.1 * np.eye(2), np.zeros(2), np.zeros(2))
    assert stack.excitation_level() > 0.0
    assert not stack.assumption_met
    stack.try_insert(np.eye(2), np.zeros(2), np.zeros(2))
    assert stack.assumption_met


def test_entry_validation():
    stack = HistoryStack(2, 4, capacity=2)
    with pytest.raises(ValueError):
        stack.try_insert(np.zeros((3, 4)), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        stack.try_insert(np.zeros((2, 4)), np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        stack.try_insert(np.full((2, 4), np.nan), np.zeros(2), np.zeros(2))
    assert len(stack) == 0


def test_zero_capacity_accepts_nothing():
    stack = HistoryStack(2, 4, capacity=0)
    assert not stack.try_insert(np.ones((2, 4)), np.zeros(2), np.zeros(2))
    assert len(stack) == 0


def test_fill_with_exact_model_data_consistency():
    plant = benchmark_plant()
    traj = benchmark_trajectory()
    stack = HistoryStack(2, 4, capacity=20)
    states = [traj.at(float(t))[0] for t in np.linspace(1.0, 30.0, 20)]
    accepted = fill_with_exact_model_data(stack, plant, states)
    assert accepted == 20
    assert len(stack) == 20
    # perfect data implies a vanishing residual at the true parameters
    assert np.abs(stack.cl_term(plant.theta)).max() < 1e-9
    assert stack.excitation_level() > 0.0


def test_to_csv_round_trip():
    rng = np.random.default_rng(9)
    stack = HistoryStack(2, 4, capacity=3)
    for _ in range(3):
        stack.try_insert(rng.normal(size=(2, 4)), rng.normal(size=2),
                         rng.normal(size=2))
    buf = io.StringIO()
    stack.to_csv(buf)
    lines = buf.getvalue().strip().split("\n")
    header = lines[0].split(",")
    assert header[0] == "k"
    assert len(header) == 1 + 8 + 2 + 2
    assert len(lines) == 4
    row = np.array([float(v) for v in lines[1].split(",")])
    ent = stack.entries[0]
    assert np.array_equal(row[1:9], ent.Y.ravel())
    assert np.array_equal(row[9:11], ent.u)
    assert np.array_equal(row[11:13], ent.xdot_hat)
