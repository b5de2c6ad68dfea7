import math

import numpy as np
import pytest
from scipy import integrate

from betajacobi import ensemble
from betajacobi.errors import DomainError
from betajacobi.martcoef import esym_at_z
from betajacobi.params import MultiplicityParams, alpha_beta_from_k

K111 = MultiplicityParams(1.0, 1.0, 1.0)
FAST = ensemble.Tuning(burn_in=2000, thin=5, chains=4)


def test_log_density_one_particle():
    k = MultiplicityParams(0.7, 0.2, 1.5)
    for x in (-0.9, 0.0, 0.4):
        expect = (0.7 + 0.2 - 0.5) * math.log(1 - x) + (0.2 - 0.5) * math.log(1 + x)
        assert ensemble.log_density_unnormalized(k, [x]) == pytest.approx(expect)


def test_log_density_pairs_and_outside():
    x = np.array([-0.5, 0.1, 0.6])
    lp = ensemble.log_density_unnormalized(K111, x)
    expect = sum(0.5 * math.log(1 + v) + 1.5 * math.log(1 - v) for v in x)
    expect += 2 * sum(math.log(abs(a - b)) for i, a in enumerate(x) for b in x[i + 1 :])
    assert lp == pytest.approx(expect)
    assert ensemble.log_density_unnormalized(K111, [0.1, 0.1]) == -math.inf
    assert ensemble.log_density_unnormalized(K111, [0.1, 1.0]) == -math.inf
    batch = ensemble.log_density_unnormalized(K111, np.array([x, [0.2, 0.2, 0.3]]))
    assert batch[0] == pytest.approx(lp) and batch[1] == -math.inf


def test_log_density_reflection_symmetry():
    k = MultiplicityParams(0.0, 0.8, 1.2)
    x = np.array([-0.7, -0.1, 0.35, 0.9])
    assert ensemble.log_density_unnormalized(k, x) == pytest.approx(ensemble.log_density_unnormalized(k, -x[::-1]))


def test_stationary_moments_by_quadrature():
    """N = 2 moments of the density against the Jacobi-zero moments."""
    k = MultiplicityParams(0.5, 0.3, 0.8)
    alpha, beta = alpha_beta_from_k(k)

    def w(y, x):  # x < y
        return math.exp(ensemble.log_density_unnormalized(k, [x, y]))

    def moment(f):
        return integrate.dblquad(lambda y, x: f(x, y) * w(y, x), -1, 1, lambda x: x, 1, epsabs=1e-11)[0]

    Z = moment(lambda x, y: 1.0)
    e = esym_at_z(2, alpha, beta)
    assert moment(lambda x, y: x + y) / Z == pytest.approx(e[1], abs=1e-7)
    assert moment(lambda x, y: x * y) / Z == pytest.approx(e[2], abs=1e-7)


def test_sample_basic_properties():
    s = ensemble.mcmc_sample(K111, 3, 4000, seed=3, tuning=FAST)
    assert s.draws.shape == (4000, 3) and s.S == 4000 and s.N == 3
    assert np.all(np.abs(s.draws) < 1)
    assert np.all(np.diff(s.draws, axis=1) > 0)
    assert 0 < s.acceptance_rate < 1
    assert np.all((s.acceptance > 0.1) & (s.acceptance < 0.6))
    assert sorted(np.unique(s.chain)) == [0, 1, 2, 3]


def test_sample_layout_independent():
    a = ensemble.mcmc_sample(K111, 2, 1000, seed=8, tuning=FAST)
    b = ensemble.mcmc_sample(K111, 2, 1000, seed=8, tuning=FAST, workers=3)
    assert a.draws.tobytes() == b.draws.tobytes()
    assert ensemble.sample_csv(a) == ensemble.sample_csv(b)
    c = ensemble.mcmc_sample(K111, 2, 1000, seed=9, tuning=FAST)
    assert not np.array_equal(a.draws, c.draws)


def test_one_particle_mean_and_ks():
    # thin 10 keeps the lag-one autocorrelation small enough for an iid KS test
    tuning = ensemble.Tuning(burn_in=2000, thin=10, chains=4)
    s = ensemble.mcmc_sample(K111, 1, 20000, seed=1, tuning=tuning)
    est, se = ensemble.moment_estimate(s, ensemble.esym_observable(1))
    assert abs(est - (-0.25)) <= 3 * se
    stat, crit, _ = ensemble.ks_marginal(s)
    assert stat <= crit


def test_moment_estimate_e0_and_errors():
    s = ensemble.mcmc_sample(K111, 2, 400, seed=2, tuning=FAST)
    assert ensemble.moment_estimate(s, ensemble.esym_observable(0)) == (1.0, 0.0)
    small = ensemble.mcmc_sample(K111, 2, 50, seed=2, tuning=FAST)
    with pytest.raises(DomainError):
        ensemble.moment_estimate(small, ensemble.esym_observable(1))
    with pytest.raises(DomainError):
        ensemble.ks_marginal(s)


def test_charpoly_observable():
    s = ensemble.mcmc_sample(K111, 2, 200, seed=2, tuning=FAST)
    vals = ensemble.charpoly_observable(0.3)(s.draws)
    assert np.allclose(vals, (0.3 - s.draws[:, 0]) * (0.3 - s.draws[:, 1]))


def test_rejects_outside_regime():
    with pytest.raises(DomainError):
        ensemble.mcmc_sample(MultiplicityParams(0, -0.7, 1), 2, 100)
    with pytest.raises(DomainError):
        ensemble.mcmc_sample(K111, 2, 0)


def test_sample_csv_header():
    s = ensemble.mcmc_sample(K111, 3, 10, seed=0, tuning=FAST)
    lines = ensemble.sample_csv(s).splitlines()
    assert lines[0] == "draw,x_1,x_2,x_3" and len(lines) == 11
