import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from gncpnp.errors import DomainError, NoFiniteResiduals
from gncpnp.robust_loss import (
    GncState,
    anneal_mu,
    anneal_steps,
    gm_influence,
    gm_surrogate,
    gnc_score,
    initial_mu,
    median,
)

inf = math.inf


def test_surrogate_examples():
    assert gm_surrogate(0.0, 2.0) == 0.0
    assert gm_surrogate(2.0, 2.0) == 0.5
    assert gm_surrogate(inf, 2.0) == 1.0


def test_influence_examples():
    assert gm_influence(0.0, 4.0) == 0.25
    assert gm_influence(4.0, 4.0) == 1 / 16
    assert gm_influence(inf, 4.0) == 0.0


def test_score_examples():
    assert gnc_score(0.0, 3.0) == 1.0
    assert gnc_score(3.0, 3.0) == 0.5
    assert gnc_score(9.0, 3.0) == pytest.approx(0.1, abs=1e-15)
    assert gnc_score(inf, 3.0) == 0.0


@pytest.mark.parametrize("fn", [gm_surrogate, gm_influence, gnc_score])
def test_domain_errors(fn):
    with pytest.raises(DomainError):
        fn(-1.0, 1.0)
    with pytest.raises(DomainError):
        fn(1.0, 0.0)
    with pytest.raises(DomainError):
        fn(np.array([1.0, -0.5]), 1.0)


def test_vectorised_inputs():
    r = np.array([0.0, 1.0, inf])
    np.testing.assert_array_equal(gnc_score(r, 1.0), [1.0, 0.5, 0.0])
    np.testing.assert_array_equal(gm_surrogate(r, 1.0), [0.0, 0.5, 1.0])


def test_influence_matches_finite_difference():
    rng = np.random.default_rng(0)
    r = rng.uniform(1e-3, 100.0, 10_000)
    mu = rng.uniform(1e-3, 100.0, 10_000)
    worst = 0.0
    for ri, mi in zip(r, mu):
        # step scaled to r + mu keeps the central difference well conditioned
        h = 1e-5 * min(ri, ri + mi)
        fd = (gm_surrogate(ri + h, mi) - gm_surrogate(ri - h, mi)) / (2 * h)
        worst = max(worst, abs(fd - gm_influence(ri, mi)) / gm_influence(ri, mi))
    assert worst < 1e-6


def test_initial_mu_examples():
    assert initial_mu([1.0, 2.0, 3.0], 5.0, 0.0) == 10.0
    assert initial_mu([4.0], 3.0, 0.5) == 12.5
    assert initial_mu([1.0, 2.0, 3.0, 4.0], 1.0, 0.0) == 2.5


def test_initial_mu_skips_infinite_residuals():
    assert initial_mu([1.0, inf, 3.0], 1.0, 0.0) == 2.0
    with pytest.raises(NoFiniteResiduals):
        initial_mu([inf, inf], 1.0, 0.0)


def test_median_convention():
    assert median([3.0, 1.0, 2.0]) == 2.0
    assert median([4.0, 1.0, 3.0, 2.0]) == 2.5


def test_anneal_examples():
    assert anneal_mu(8.0, 0.5, 0.5) == 4.0
    assert anneal_mu(0.6, 0.5, 0.5) == 0.5
    assert anneal_mu(0.5, 0.5, 0.5) == 0.5


@given(st.floats(0.5, 1e6), st.floats(0.05, 0.95), st.floats(1e-3, 10.0))
def test_anneal_reaches_floor_within_bound(mu0, gamma, mu_final):
    mu0 = max(mu0, mu_final)
    bound = max(0, math.ceil(math.log(mu_final / mu0) / math.log(gamma)))
    mu, steps = mu0, 0
    while mu > mu_final:
        mu = anneal_mu(mu, gamma, mu_final)
        steps += 1
    assert steps <= bound


def test_anneal_steps_example():
    assert anneal_steps(8.0, 0.5, 0.5) == 4
    assert anneal_steps(0.5, 0.5, 0.5) == 0


def test_score_contracts_with_mu():
    rng = np.random.default_rng(1)
    r = rng.exponential(50.0, 10_000)
    mu = rng.uniform(1e-3, 100.0, 10_000)
    mu_small = mu * rng.uniform(0.0, 1.0, 10_000) + 1e-9
    assert np.all(gnc_score(r, 1.0) >= 0)
    for ri, m, ms in zip(r, mu, mu_small):
        assert gnc_score(ri, ms) <= gnc_score(ri, m)


@given(st.floats(0.0, 1e3), st.floats(1e-3, 1e3), st.floats(1e-6, 1e3))
def test_score_strictly_decreasing_in_r(r, mu, dr):
    # near r = 0 the score is flat to second order; skip changes below double resolution
    assume(((r + dr) ** 2 - r**2) / mu**2 > 1e-12)
    assert gnc_score(r + dr, mu) < gnc_score(r, mu)


def test_state_annealing():
    s = GncState(8.0, 0).annealed(0.5, 0.5)
    assert (s.mu, s.iteration) == (4.0, 1)
