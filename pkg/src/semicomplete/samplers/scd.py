"""Semi-complete data likelihood samplers.

SCD1 updates N by discrete Metropolis-Hastings under any prior on N.
SCD2 draws N - n from its Negative-Binomial full conditional, which holds
under the Jeffreys prior p(N) proportional to 1/N (upper bound ignored).

Under SCD2 the parameter updates use the posterior with N summed out,
sum_N N!/(N-n)!/N (1-p*)^(N-n) = (n-1)! p*^-n, so N is an exact draw given
the parameters and does not slow their mixing. Under SCD1 the joint moves
co-propose N from NB(n, p*') and correct for it in the acceptance ratio.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..likelihood import log_falling_factorial, log_prior_N
from ..model import CaptureData, DataError, NegBinomial, Poisson, Power, PriorSpec, SurveyGeometry, TruncJeffreys
from .core import (
    SamplerConfig,
    ScaleAdapter,
    Trace,
    TraceRecorder,
    chain_indices,
    chain_rng,
    gibbs_update_N_negbin,
    update_scalar_params,
    vector_rw_accept,
)
from .families import Family, make_family
from .moves import make_moves, no_commit


def negbin_logpmf(x: int, n: int, log_miss: float) -> float:
    """log NB(x; n, p*) with p* = 1 - exp(log_miss)."""
    if log_miss == -math.inf:
        return 0.0 if x == 0 else -math.inf
    p = -math.expm1(log_miss)
    if p <= 0.0:
        return -math.inf
    return (math.lgamma(x + n) - math.lgamma(n) - math.lgamma(x + 1)
            + n * math.log(p) + x * log_miss)


def _initial_N(n: int, upper: int | None, rng: np.random.Generator) -> int:
    N = n + int(rng.integers(0, n + 1))
    return min(N, upper) if upper is not None else N


def _scd_chain(family: Family, config: SamplerConfig, chain: int, n_update: str) -> Trace:
    rng = chain_rng(config.seed, chain)
    priors = family.priors
    n = family.n
    family.recompute = config.recompute_pstar
    fixed = set(config.fixed)
    collapsed = n_update == "gibbs" and "N" not in fixed

    params = family.init_params(rng)
    params.update({k: float(v) for k, v in config.init.items() if k in family.param_names})
    eps = family.init_obs_eps(params, rng)
    upper = priors.upper_bound if n_update == "mh" else None
    N = int(config.init.get("N", _initial_N(n, upper, rng)))

    adapters = {name: ScaleAdapter(family.initial_scale(name), config) for name in family.param_names}
    eps_adapter = ScaleAdapter(np.full(n, family.eps_scale(params)), config)
    n_adapter = ScaleAdapter(5.0, config)
    block, shift = make_moves(family, config, fixed)

    def log_target_N(m: int, log_miss: float) -> float:
        if m < n:
            return -math.inf
        lp = log_prior_N(m, priors)
        if lp == -math.inf:
            return lp
        return lp + log_falling_factorial(m, n) + ((m - n) * log_miss if m > n else 0.0)

    def pstar_term(p) -> float:
        lu = family.log_unobserved(p)
        if collapsed:
            return -n * math.log(-math.expm1(lu)) if lu < 0 else -math.inf
        return (N - n) * lu if N > n else 0.0

    def extra(name, p):
        aff = family.affects[name]
        total = 0.0
        if "obs" in aff:
            total += family.obs(p, eps).sum()
        if "dens" in aff:
            total += family.dens(p, eps).sum()
        if "pstar" in aff:
            total += pstar_term(p)
        return total

    def obs_loglik(p, e):
        return family.obs(p, e).sum()

    def coupled(old, new):
        if n_update == "gibbs" or "N" in fixed:
            return pstar_term(new) - pstar_term(old), no_commit
        # co-propose N' = n + NB(n, p*(new)); the reverse move draws N from NB(n, p*(old))
        lu_old, lu_new = family.log_unobserved(old), family.log_unobserved(new)
        if not lu_new < 0:
            return -math.inf, no_commit
        N_new = gibbs_update_N_negbin(n, -math.expm1(lu_new), rng)
        delta = (log_target_N(N_new, lu_new) - log_target_N(N, lu_old)
                 + negbin_logpmf(N - n, n, lu_old) - negbin_logpmf(N_new - n, n, lu_new))

        def commit():
            nonlocal N
            N = N_new
        return delta, commit

    recorder = TraceRecorder(["N", *family.param_names], config)
    start = time.perf_counter()
    for it in range(1, config.iterations + 1):
        update_scalar_params(family, params, extra, adapters, it, rng, fixed)
        if block is not None:
            block.step(it, params, eps, obs_loglik, coupled, rng)
        if shift is not None:
            shift.step(it, params, eps, coupled, rng)

        prop = family.propose(eps, eps_adapter.scale, rng)
        lp_cur = family.obs(params, eps) + family.dens(params, eps)
        lp_prop = family.obs(params, prop) + family.dens(params, prop)
        acc = vector_rw_accept(lp_prop, lp_cur, rng)
        eps[acc] = prop[acc]
        eps_adapter.update(it, acc)

        if "N" not in fixed:
            log_miss = family.log_unobserved(params)
            if n_update == "gibbs":
                N = gibbs_update_N_negbin(n, -math.expm1(log_miss), rng)
            else:
                delta = max(1, int(round(n_adapter.scale[0])))
                step = int(rng.integers(1, delta + 1))
                prop_N = N + step if rng.random() < 0.5 else N - step
                lp_new = log_target_N(prop_N, log_miss)
                accepted = False
                if lp_new > -math.inf:
                    if math.log(rng.random()) < lp_new - log_target_N(N, log_miss):
                        N = prop_N
                        accepted = True
                n_adapter.update(it, float(accepted))

        recorder.maybe_record(it, [N, *(params[k] for k in family.param_names)])

    wall = time.perf_counter() - start
    acceptance = {name: adapters[name].rate() for name in family.param_names}
    acceptance["eps"] = eps_adapter.rate()
    if n_update == "mh":
        acceptance["N"] = n_adapter.rate()
    if block is not None:
        acceptance["block"] = block.adapter.rate()
    if shift is not None:
        acceptance["shift"] = shift.adapter.rate()
    return recorder.finish(chain, acceptance, wall)


def _check_data(data: CaptureData) -> None:
    if data.n < 1:
        raise DataError("no observed individuals")


def check_scd2_prior(priors: PriorSpec) -> None:
    nprior = priors.n_prior
    if not (isinstance(nprior, TruncJeffreys) or (isinstance(nprior, Power) and nprior.c == 1)):
        raise DataError("SCD2 needs the Jeffreys prior on N (Negative-Binomial full conditional)")


def run_scd2(data: CaptureData, geometry: SurveyGeometry | None = None,
             priors: PriorSpec | None = None, config: SamplerConfig | None = None,
             family: Family | None = None, chain_ids=None) -> list[Trace]:
    priors = priors or PriorSpec()
    config = config or SamplerConfig()
    _check_data(data)
    check_scd2_prior(priors)
    family = family or make_family(data, geometry, priors, config.q)
    return [_scd_chain(family, config, c, "gibbs") for c in chain_indices(config, chain_ids)]


def run_scd1(data: CaptureData, geometry: SurveyGeometry | None = None,
             priors: PriorSpec | None = None, config: SamplerConfig | None = None,
             family: Family | None = None, chain_ids=None) -> list[Trace]:
    priors = priors or PriorSpec()
    config = config or SamplerConfig()
    _check_data(data)
    if not isinstance(priors.n_prior, (TruncJeffreys, Power, Poisson, NegBinomial)):
        raise DataError("SCD1 needs a bounded or proper prior on N")
    if priors.upper_bound is not None and priors.upper_bound < data.n:
        raise DataError("upper bound M is below the number observed")
    family = family or make_family(data, geometry, priors, config.q)
    return [_scd_chain(family, config, c, "mh") for c in chain_indices(config, chain_ids)]
