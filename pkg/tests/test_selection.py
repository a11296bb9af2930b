import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwglasso.exceptions import DataError
from hwglasso.glasso import PenaltyMatrix, fit_weighted_glasso
from hwglasso.selection import (
    bic_score,
    default_grid,
    lambda_max,
    make_grid,
    select_lambda,
    select_lambda_pair,
)
from hwglasso.two_step import HubSet
from hwglasso.weights import uniform_weights
from helpers import random_spd


def test_bic_hand_value():
    s = np.array([[2.0, 0.5], [0.5, 1.0]])
    theta = np.array([[1.0, -0.2], [-0.2, 1.5]])
    logdet = np.log(1.5 - 0.04)
    tr = 2.0 + 1.5 - 2 * 0.1
    assert bic_score(s, theta, 10) == pytest.approx(-10 * (logdet - tr) + np.log(10))


def test_bic_ignores_diagonal_in_count():
    s = np.eye(3)
    assert bic_score(s, np.eye(3), 5) == pytest.approx(-5 * (0.0 - 3.0))


def test_make_grid_validation():
    assert make_grid([3, 2, 2, 1]).tolist() == [3, 2, 2, 1]
    for bad in ([], [1, 2], [1, -1], [np.inf]):
        with pytest.raises(DataError):
            make_grid(bad)


def test_lambda_max_zeroes_everything(rng):
    s = random_spd(rng, 6)
    w = uniform_weights(6)
    lm = lambda_max(s, w)
    fit = fit_weighted_glasso(s, PenaltyMatrix.from_weights(lm * 1.0001, w))
    assert fit.edge_count == 0
    fit = fit_weighted_glasso(s, PenaltyMatrix.from_weights(lm * 0.99, w))
    assert fit.edge_count >= 1


def test_default_grid_descending_and_uniform_span(rng):
    s = random_spd(rng, 5)
    g = default_grid(s, uniform_weights(5), 10)
    assert g.size == 10
    assert np.all(np.diff(g) < 0)
    assert g[-1] == pytest.approx(g[0] / 100)


def test_select_lambda_report(rng, tmp_path):
    s = random_spd(rng, 6, n=40)
    w = uniform_weights(6)
    grid = default_grid(s, w, 8)
    fit, rep = select_lambda(s, w, grid, 40)
    scores = [pt["bic"] for pt in rep.points]
    assert rep.chosen == int(np.argmin(scores))
    assert rep.chosen_lambda == grid[rep.chosen]
    assert fit.converged
    json.loads(rep.to_json())
    rep.write_path_csv(tmp_path / "path.csv")
    assert (tmp_path / "path.csv").read_text().count("\n") == 9


def test_ties_go_to_larger_penalty(rng):
    s = random_spd(rng, 4)
    w = uniform_weights(4)
    top = lambda_max(s, w)
    # every point above lambda_max gives the same diagonal fit and score
    _, rep = select_lambda(s, w, [4 * top, 3 * top, 2 * top], 30)
    assert rep.chosen == 0


def test_repeated_grid_values_reuse_fit(rng, kkt_every_fit):
    s = random_spd(rng, 5)
    w = uniform_weights(5)
    select_lambda(s, w, [0.3, 0.3, 0.3], 20)
    n_fits = len(kkt_every_fit)
    kkt_every_fit.clear()
    select_lambda(s, w, [0.3], 20)
    assert len(kkt_every_fit) == n_fits


def test_parallel_cold_equals_serial_cold(rng):
    s = random_spd(rng, 6)
    w = uniform_weights(6)
    grid = default_grid(s, w, 5)
    a, ra = select_lambda(s, w, grid, 20, warm_start=False)
    b, rb = select_lambda(s, w, grid, 20, warm_start=False, n_jobs=2)
    assert ra.chosen == rb.chosen
    np.testing.assert_array_equal(a.theta, b.theta)


def test_pair_selection_order_and_choice(rng):
    s = random_spd(rng, 8, n=30)
    g1 = [0.4, 0.2, 0.1]
    g2 = [0.5, 0.25]
    fit, rep = select_lambda_pair(s, HubSet((0, 3)), g1, g2, 30)
    assert [(pt["lambda1"], pt["lambda2"]) for pt in rep.points] == [(a, b) for a in g1 for b in g2]
    assert rep.points[rep.chosen]["bic"] == min(pt["bic"] for pt in rep.points)
    assert isinstance(rep.chosen_lambda, tuple)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 7), st.integers(0, 5000))
def test_chosen_score_is_minimal(p, seed):
    r = np.random.default_rng(seed)
    s = random_spd(r, p, n=3 * p)
    w = uniform_weights(p)
    fit, rep = select_lambda(s, w, default_grid(s, w, 6), 3 * p)
    assert bic_score(s, fit.theta, 3 * p) == pytest.approx(min(pt["bic"] for pt in rep.points))
