import math

import numpy as np
import pytest

import qgain


def test_two_candidate_moments():
    t = qgain.moments(2)
    assert t.lambda_ == 2
    assert t.e1 == pytest.approx([-1 / math.sqrt(math.pi), 1 / math.sqrt(math.pi)], abs=1e-10)
    assert t.e2 is None


def test_optimal_gain_for_two_candidates():
    t = qgain.moments(2)
    w = qgain.optimal_weights(t.e1)
    assert w.w == pytest.approx([0.5, -0.5])
    s = qgain.sigma_bar_star_sphere(w, t.e1)
    assert qgain.phi_inf(s, w, t.e1) == pytest.approx(1 / math.pi, rel=1e-10)


def test_weights():
    w = qgain.truncation_weights(10, 4)
    assert np.sum(w.w) == pytest.approx(1.0)
    assert w.mu_w == pytest.approx(4.0)
    assert qgain.cma_log_weights(10).w[-1] == 0.0
    assert qgain.custom_weights([1, 3]).w == pytest.approx([0.75, 0.25])
    with pytest.raises(Exception):
        qgain.truncation_weights(4, 9)


def test_general_theory_and_simulation():
    t = qgain.moments(6, e2=True, samples=20000, seed=3)
    assert t.e2.shape == (6, 6)
    assert t.e2.sum(axis=1) == pytest.approx(np.ones(6), abs=1e-12)
    w, s, _ = qgain.optimal_weights_general(t, 0.01)
    assert qgain.phi_hat(s, w, t, 0.01) > 0
    model = qgain.QuadraticModel("sphere", 100)
    assert model(np.ones(100)) == pytest.approx(50.0)
    sb = qgain.sigma_bar_star(w, t, 0.01)
    assert math.isfinite(qgain.empirical_gain(model, w, sb, 1.0, 200, seed=2))
