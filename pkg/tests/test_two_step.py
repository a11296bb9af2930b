import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwglasso.exceptions import DataError
from hwglasso.glasso import PenaltyMatrix, fit_weighted_glasso
from hwglasso.two_step import (
    HubSet,
    degrees,
    fit_two_step,
    identify_hubs_kmeans,
    identify_hubs_threshold,
    two_step_weights,
)
from helpers import random_spd
from oracles import brute_two_means


def star(p, centre=0):
    t = np.eye(p)
    t[centre, :] = t[:, centre] = 0.1
    t[centre, centre] = 1.0
    return t


def test_hubset_normalises_and_roundtrips():
    h = HubSet((3, 1))
    assert h.indices == (1, 3)
    assert HubSet.from_json(h.to_json()) == h
    with pytest.raises(DataError):
        HubSet((1, 1))
    with pytest.raises(DataError):
        h.mask(3)


def test_threshold_rule_star():
    t = star(21)
    assert degrees(t).tolist() == [20] + [1] * 20
    assert identify_hubs_threshold(t, 10).indices == (0,)


def test_threshold_rule_is_strict():
    # p = 11: threshold is 1.0, so degree exactly 1 is not a hub
    t = np.eye(11)
    t[0, 1] = t[1, 0] = 0.2
    assert identify_hubs_threshold(t, 10).indices == ()


def test_kmeans_degenerate_cases(caplog):
    with caplog.at_level(logging.WARNING):
        assert identify_hubs_kmeans(np.eye(5)).indices == ()
    assert "equal" in caplog.text


def test_kmeans_star():
    assert identify_hubs_kmeans(star(12)).indices == (0,)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=2, max_size=12))
def test_two_means_matches_exhaustive(degs):
    d = np.array(degs, dtype=float)
    if np.all(d == d[0]):
        return
    p = d.size
    # build a matrix with these degrees only through its degree vector
    hubs = identify_hubs_kmeans_from_degrees(d)
    best = brute_two_means(d)
    assert set(hubs) == set(best) or np.isclose(
        _ss(d, hubs), _ss(d, best)
    ), (hubs, best, p)


def identify_hubs_kmeans_from_degrees(d):
    from hwglasso.two_step import _two_means_split

    order, k = _two_means_split(d)
    return tuple(sorted(order[:k].tolist()))


def _ss(d, group):
    m = np.zeros(d.size, dtype=bool)
    m[list(group)] = True
    return sum(((d[g] - d[g].mean()) ** 2).sum() for g in (m, ~m) if g.any())


def test_two_step_weights_structure():
    pen = two_step_weights(HubSet((1,)), 0.1, 0.5, p=4)
    expected = np.full((4, 4), 0.5)
    expected[1, :] = expected[:, 1] = 0.1
    np.fill_diagonal(expected, 0.0)
    np.testing.assert_array_equal(pen.rho, expected)


def test_two_step_weights_adaptive():
    t = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.0]])
    pen = two_step_weights(HubSet((0,)), 0.1, 0.4, mode="adaptive", theta_tilde=t)
    assert pen.rho[0, 1] == pytest.approx(0.2)
    assert pen.rho[1, 2] == pytest.approx(2.0)
    assert np.isinf(pen.rho[0, 2])
    with pytest.raises(DataError):
        two_step_weights(HubSet((0,)), 0.1, 0.4, p=3, mode="adaptive")


def test_no_hubs_equals_uniform_penalty(rng):
    s = random_spd(rng, 6)
    a = fit_weighted_glasso(s, two_step_weights(HubSet(()), 0.9, 0.2, p=6))
    b = fit_weighted_glasso(s, PenaltyMatrix.uniform(6, 0.2))
    np.testing.assert_array_equal(a.theta, b.theta)


def test_fit_two_step_known_and_threshold(rng):
    p = 12
    t0 = star(p) * 3
    np.fill_diagonal(t0, 1.0)
    t0[0, 1:] = t0[1:, 0] = 0.25
    x = rng.multivariate_normal(np.zeros(p), np.linalg.inv(t0), size=200)
    s = x.T @ x / 200
    fit, hubs, rep = fit_two_step(s, None, 200, known_hubs=HubSet((0,)), n_grid=4)
    assert hubs.indices == (0,)
    assert len(rep.points) == 16
    first = fit_weighted_glasso(s, PenaltyMatrix.uniform(p, 0.05))
    fit2, hubs2, _ = fit_two_step(s, first, 200, hub_method="threshold", n_grid=3)
    assert 0 in hubs2
    with pytest.raises(ValueError):
        fit_two_step(s, first, 200, hub_method="spectral")
