import itertools
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit, gammaln

from semicomplete.data import simulate_mh, simulate_secr
from semicomplete.diagnostics import mcse
from semicomplete.integrate import gauss_hermite_rule, mh_prob_unobserved
from semicomplete.model import (
    CaptureData,
    DataError,
    Poisson,
    PriorSpec,
    SurveyGeometry,
    TruncJeffreys,
    rectangular_mask,
)
from semicomplete.samplers.core import ScaleAdapter
from semicomplete.samplers import (
    SAMPLERS,
    MhFamily,
    SamplerConfig,

    adaptive_rw_update,
    chain_rng,
    gibbs_update_N_negbin,
    gibbs_update_psi,
    gibbs_update_z,
    run_cdde,
    run_cdr,
    run_scd1,
    run_scd2,
)


# -- kernels -----------------------------------------------------------------

def test_rw_update_standard_normal():
    rng = np.random.default_rng(0)
    x, draws = 0.0, np.empty(100_000)
    target = lambda v: -0.5 * v * v
    for i in range(len(draws)):
        x, _ = adaptive_rw_update(x, target, 2.4, rng)
        draws[i] = x
    assert abs(draws.mean()) < 0.02
    assert 0.95 <= draws.var() <= 1.05


def test_rw_update_zero_scale_and_impossible_proposal():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x, acc = adaptive_rw_update(1.5, lambda v: -v * v, 0.0, rng)
        assert acc and x == 1.5
    target = lambda v: 0.0 if v == 0.0 else -math.inf
    for _ in range(100):
        x, acc = adaptive_rw_update(0.0, target, 1.0, rng)
        assert not acc and x == 0.0


def test_negbin_gibbs():
    rng = np.random.default_rng(1)
    assert all(gibbs_update_N_negbin(5, 1.0, rng) == 5 for _ in range(100))
    draws = np.array([gibbs_update_N_negbin(1, 0.5, rng) for _ in range(200_000)]) - 1
    for x, p in zip(range(3), (0.5, 0.25, 0.125)):
        assert abs((draws == x).mean() - p) < 0.005
    with pytest.raises(ValueError):
        gibbs_update_N_negbin(5, 0.0, rng)


def test_psi_and_z_gibbs():
    rng = np.random.default_rng(2)
    psi = np.array([gibbs_update_psi(1.0, 1.0, 3, 4, rng) for _ in range(100_000)])
    assert abs(psi.mean() - 2 / 3) < 0.005
    z = gibbs_update_z(np.zeros(200_000), 0.3, rng)
    assert abs(z.mean() - 0.3) < 0.005
    assert gibbs_update_z(np.full(10, -np.inf), 0.9, rng).sum() == 0


def test_chain_rng_splitting_rule():
    a = chain_rng(42, 2).random(5)
    b = np.random.default_rng(np.random.SeedSequence(42).spawn(3)[2]).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(chain_rng(42, 0).random(5), chain_rng(42, 1).random(5))


def test_scale_adapter_freezes_after_burn_in():
    cfg = SamplerConfig(iterations=1000, burn_in=200, adapt_window=50)
    ad = ScaleAdapter(1.0, cfg)
    for it in range(1, 201):
        ad.update(it, 1.0)
    assert ad.scale[0] > 1.0
    frozen = ad.scale.copy()
    for it in range(201, 1001):
        ad.update(it, 0.0 if it % 2 else 1.0)
    np.testing.assert_array_equal(ad.scale, frozen)
    assert ad.rate() == pytest.approx(0.5)


def test_config_validation():
    with pytest.raises(DataError):
        SamplerConfig(iterations=10, burn_in=10)
    with pytest.raises(DataError):
        SamplerConfig(thin=0)
    with pytest.raises(DataError):
        SamplerConfig(seed=-1)


# -- small fixtures -----------------------------------------------------------

@pytest.fixture(scope="module")
def small_mh():
    return simulate_mh(36, 5, -0.8, 0.7, seed=1)


@pytest.fixture(scope="module")
def small_secr():
    mask, area = rectangular_mask((0.0, 4.0), (0.0, 4.0), 16, 16)
    det = np.array([[x, y] for x in (1.5, 2.0, 2.5) for y in (1.5, 2.5)])
    g = SurveyGeometry(det, mask, area)
    return simulate_secr(g, 0.5, 20, 2, seed=3), g


QUICK = dict(iterations=600, burn_in=200, chains=2, seed=11, M=120)


@pytest.mark.parametrize("name", sorted(SAMPLERS))
def test_trace_shape_and_support_mh(name, small_mh):
    cfg = SamplerConfig(**QUICK, thin=2)
    traces = SAMPLERS[name](small_mh, priors=PriorSpec(n_prior=TruncJeffreys(120)), config=cfg)
    assert [t.chain for t in traces] == [0, 1]
    for t in traces:
        assert len(t) == cfg.n_stored == 200
        assert all(len(t[k]) == 200 for k in t.names)
        assert t["N"].dtype == np.int64
        assert (t["N"] >= small_mh.n).all()
        if name != "scd2":
            assert (t["N"] <= 120).all()
        assert (t["sigma2"] > 0).all()
        assert all(0.0 <= v <= 1.0 for v in t.acceptance.values())


@pytest.mark.parametrize("name", sorted(SAMPLERS))
def test_trace_shape_and_support_secr(name, small_secr):
    data, g = small_secr
    cfg = SamplerConfig(**{**QUICK, "chains": 1})
    (t,) = SAMPLERS[name](data, geometry=g, priors=PriorSpec(n_prior=TruncJeffreys(120)), config=cfg)
    assert t.names[:2] == ["N", "sigma"]
    assert (t["N"] >= data.n).all() and (t["N"] <= 120).all() or name == "scd2"
    assert ((t["sigma"] > 0) & (t["sigma"] <= 10)).all()


@pytest.mark.parametrize("name", sorted(SAMPLERS))
def test_equal_seeds_give_identical_traces(name, small_mh):
    cfg = SamplerConfig(**{**QUICK, "chains": 1})
    pr = PriorSpec(n_prior=TruncJeffreys(120))
    a = SAMPLERS[name](small_mh, priors=pr, config=cfg)[0]
    b = SAMPLERS[name](small_mh, priors=pr, config=cfg)[0]
    for k in a.names:
        np.testing.assert_array_equal(a[k], b[k])
    c = SAMPLERS[name](small_mh, priors=pr, config=SamplerConfig(**{**QUICK, "chains": 1, "seed": 12}))[0]
    assert not np.array_equal(a["alpha"], c["alpha"])


def test_chain_subset_matches_full_run(small_mh):
    cfg = SamplerConfig(**QUICK)
    full = run_scd2(small_mh, config=cfg)
    part = run_scd2(small_mh, config=cfg, chain_ids=[1])
    np.testing.assert_array_equal(full[1]["N"], part[0]["N"])
    with pytest.raises(DataError):
        run_scd2(small_mh, config=cfg, chain_ids=[2])


def test_sampler_input_errors(small_mh):
    with pytest.raises(DataError):
        run_scd2(small_mh, priors=PriorSpec(n_prior=Poisson(40.0)))
    with pytest.raises(DataError):
        run_scd1(small_mh, priors=PriorSpec(n_prior=TruncJeffreys(small_mh.n - 1)))
    with pytest.raises(DataError):
        run_cdr(small_mh, config=SamplerConfig(M=small_mh.n - 1))
    with pytest.raises(DataError):
        run_cdde(small_mh, config=SamplerConfig(M=small_mh.n - 1))


# -- analytic oracles ---------------------------------------------------------

def test_scd1_poisson_prior_with_fixed_parameters(small_mh):
    # with alpha, sigma2 fixed, N - n | rest ~ Poisson(lam (1 - p*))
    lam, alpha, sigma2 = 40.0, -0.8, 0.5
    miss = mh_prob_unobserved(alpha, math.sqrt(sigma2), 5, gauss_hermite_rule(100))
    cfg = SamplerConfig(iterations=60_000, burn_in=2000, chains=1, seed=5,
                        fixed=("alpha", "sigma2"), init={"alpha": alpha, "sigma2": sigma2})
    (t,) = run_scd1(small_mh, priors=PriorSpec(n_prior=Poisson(lam)), config=cfg)
    x = t["N"] - small_mh.n
    assert (t["alpha"] == alpha).all()
    mu = lam * miss
    assert abs(x.mean() - mu) < 4 * mcse([x.astype(float)])
    for k in range(int(mu) - 2, int(mu) + 3):
        assert abs((x == k).mean() - stats.poisson.pmf(k, mu)) < 0.02


class _CertainDetection(MhFamily):
    def prob_unobserved(self, params):
        return 0.0


def test_scd1_certain_detection_keeps_N_at_n(small_mh):
    pr = PriorSpec(n_prior=Poisson(float(small_mh.n)))
    fam = _CertainDetection(small_mh, pr, 100)
    cfg = SamplerConfig(iterations=2000, burn_in=100, chains=1, init={"N": small_mh.n})
    (t,) = run_scd1(small_mh, priors=pr, config=cfg, family=fam)
    assert (t["N"] == small_mh.n).all()
    (t2,) = run_scd2(small_mh, config=cfg, family=_CertainDetection(small_mh, PriorSpec(), 100))
    assert (t2["N"] == small_mh.n).all()


def test_scd2_no_heterogeneity_reduction():
    # sigma2 pinned near zero: the model is M_0 with p = logistic(alpha) and
    # N | alpha = n / p* in mean; average over the alpha posterior on a grid
    data = simulate_mh(60, 5, -0.5, 0.0, seed=4)
    n, T = data.n, data.T
    Y = int(data.histories.sum())
    a = np.linspace(-4, 3, 20001)
    p = expit(a)
    pstar = 1 - (1 - p) ** T
    logw = -a**2 / 200 + Y * np.log(p) + (T * n - Y) * np.log1p(-p) - n * np.log(pstar)
    w = np.exp(logw - logw.max())
    oracle = (w * n / pstar).sum() / w.sum()
    cfg = SamplerConfig(iterations=40_000, burn_in=4000, chains=2, seed=3,
                        fixed=("sigma2",), init={"sigma2": 1e-8})
    traces = run_scd2(data, config=cfg)
    chains = [t["N"].astype(float) for t in traces]
    est = np.concatenate(chains).mean()
    assert abs(est - oracle) < 4 * mcse(chains)


def test_cdde_enumeration_oracle():
    # n = 2, M = 4, parameters fixed, pseudo-prior equal to the effect density:
    # P(N) is proportional to prior(N) N!/(N - n)! (1 - p*)^(N - n) on {2, 3, 4}
    data = CaptureData(np.array([[1, 0, 1], [0, 1, 0]]))
    alpha, sigma2 = -0.6, 0.8
    rule = gauss_hermite_rule(100)
    T, n, M = 3, 2, 4
    sd = math.sqrt(sigma2)
    # enumerate ordered indicator configurations z = (1, 1, z3, z4) with z prefix-ones,
    # integrating each augmented effect by quadrature
    eta = math.sqrt(2) * sd * rule.nodes + alpha
    miss = float(np.dot(rule.weights, (1 + np.exp(eta)) ** -T) / math.sqrt(math.pi))
    weights = {}
    for z in itertools.product((0, 1), repeat=M - n):
        if list(z) != sorted(z, reverse=True):
            continue
        N = n + sum(z)
        weights[N] = math.exp(-math.log(N) + gammaln(N + 1) - gammaln(N - n + 1) + (N - n) * math.log(miss))
    total = sum(weights.values())
    probs = {N: w / total for N, w in weights.items()}
    cfg = SamplerConfig(iterations=80_000, burn_in=2000, chains=1, seed=9, M=M,
                        fixed=("alpha", "sigma2"), init={"alpha": alpha, "sigma2": sigma2})
    (t,) = run_cdde(data, priors=PriorSpec(n_prior=TruncJeffreys(M)), config=cfg, pseudo_prior=(0.0, sd))
    for N, p in probs.items():
        ind = (t["N"] == N).astype(float)
        assert abs(ind.mean() - p) < 2 * mcse([ind])


@pytest.mark.slow
def test_cross_sampler_agreement(small_mh):
    assert 28 <= small_mh.n <= 32
    pr = PriorSpec(n_prior=TruncJeffreys(300))
    cfg = SamplerConfig(iterations=20_000, burn_in=2000, chains=3, seed=7, M=300)
    results = {}
    for name in sorted(SAMPLERS):
        chains = [t["N"].astype(float) for t in SAMPLERS[name](small_mh, priors=pr, config=cfg)]
        results[name] = (np.concatenate(chains).mean(), mcse(chains))
    for (a, (ma, sa)), (b, (mb, sb)) in itertools.combinations(results.items(), 2):
        assert abs(ma - mb) < 3 * math.hypot(sa, sb), (a, b, results)
