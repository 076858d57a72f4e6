"""Super-population data augmentation samplers.

Both augment the n observed individuals with M - n all-zero histories.

CD:R  indicators z_i ~ Bern(psi), psi ~ Beta(a, b); N = sum z_i, which
      induces a Beta-Binomial prior on N.
CD:DE indicators ordered, z_i = 1 for i <= N, with an explicit prior on N.
      Effects of the inactive slots i > N follow a pseudo-prior fitted to the
      augmented effects seen during burn-in; their density cancels from the
      (N, parameter) marginal, which equals the semi-complete posterior.
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
    gibbs_update_psi,
    gibbs_update_z,
    update_scalar_params,
    vector_rw_accept,
)
from .families import Family, make_family
from .moves import make_moves, no_commit
from .scd import negbin_logpmf


def _no_coupling(old, new):
    return 0.0, no_commit


def _full_eps(family: Family, params: dict, M: int, rng: np.random.Generator) -> np.ndarray:
    n = family.n
    eps = family.empty_eps(M)
    eps[:n] = family.init_obs_eps(params, rng)
    eps[n:] = family.draw_eps(params, M - n, rng)
    return eps


def _cdr_chain(family: Family, config: SamplerConfig, chain: int) -> Trace:
    rng = chain_rng(config.seed, chain)
    priors = family.priors
    n, M = family.n, config.M
    fixed = set(config.fixed)
    a, b = priors.psi_prior.a, priors.psi_prior.b

    params = family.init_params(rng)
    params.update({k: float(v) for k, v in config.init.items() if k in family.param_names})
    eps = _full_eps(family, params, M, rng)
    N0 = min(int(config.init.get("N", n + int(rng.integers(0, n + 1)))), M)
    z = np.zeros(M, dtype=np.int8)
    z[:N0] = 1
    psi = float(config.init.get("psi", N0 / M))

    adapters = {name: ScaleAdapter(family.initial_scale(name), config) for name in family.param_names}
    eps_adapter = ScaleAdapter(np.full(M, family.eps_scale(params)), config)
    block, shift = make_moves(family, config, fixed)

    def loglik(p, e):
        total = family.obs(p, e[:n]).sum()
        active = z[n:].astype(bool)
        if active.any():
            total += family.miss(p, e[n:][active]).sum()
        return total

    def extra(name, p):
        aff = family.affects[name]
        total = 0.0
        if "obs" in aff or "miss" in aff:
            total += loglik(p, eps)
        if "dens" in aff:
            total += family.dens(p, eps).sum()
        return total

    recorder = TraceRecorder(["N", *family.param_names, "psi"], config)
    start = time.perf_counter()
    for it in range(1, config.iterations + 1):
        update_scalar_params(family, params, extra, adapters, it, rng, fixed)
        if block is not None:
            block.step(it, params, eps, loglik, _no_coupling, rng)
        if shift is not None:
            shift.step(it, params, eps, _no_coupling, rng)

        prop = family.propose(eps, eps_adapter.scale, rng)
        zf = z[n:].astype(float)
        lp_cur = family.dens(params, eps)
        lp_prop = family.dens(params, prop)
        lp_cur[:n] += family.obs(params, eps[:n])
        lp_prop[:n] += family.obs(params, prop[:n])
        lp_cur[n:] += zf * family.miss(params, eps[n:])
        lp_prop[n:] += zf * family.miss(params, prop[n:])
        acc = vector_rw_accept(lp_prop, lp_cur, rng)
        eps[acc] = prop[acc]
        eps_adapter.update(it, acc)

        if "N" not in fixed:
            z[n:] = gibbs_update_z(family.miss(params, eps[n:]), psi, rng)
            psi = gibbs_update_psi(a, b, int(z.sum()), M, rng)

        recorder.maybe_record(it, [int(z.sum()), *(params[k] for k in family.param_names), psi])

    wall = time.perf_counter() - start
    acceptance = {name: adapters[name].rate() for name in family.param_names}
    acceptance["eps"] = eps_adapter.rate()
    if block is not None:
        acceptance["block"] = block.adapter.rate()
    if shift is not None:
        acceptance["shift"] = shift.adapter.rate()
    return recorder.finish(chain, acceptance, wall)


def _cdde_chain(family: Family, config: SamplerConfig, chain: int, pseudo_prior=None) -> Trace:
    rng = chain_rng(config.seed, chain)
    priors = family.priors
    n, M = family.n, config.M
    fixed = set(config.fixed)

    params = family.init_params(rng)
    params.update({k: float(v) for k, v in config.init.items() if k in family.param_names})
    N = min(int(config.init.get("N", n + int(rng.integers(0, n + 1)))), M)
    pp = pseudo_prior if pseudo_prior is not None else family.default_pseudo_prior()
    fit_pp = pseudo_prior is None
    eps = family.empty_eps(M)
    eps[:n] = family.init_obs_eps(params, rng)
    eps[n:N] = family.draw_eps(params, N - n, rng)
    eps[N:] = family.pseudo_draw(pp, M - N, rng)

    adapters = {name: ScaleAdapter(family.initial_scale(name), config) for name in family.param_names}
    eps_adapter = ScaleAdapter(np.full(M, family.eps_scale(params)), config)
    n_adapter = ScaleAdapter(5.0, config)
    block, shift = make_moves(family, config, fixed)
    pilot: list[np.ndarray] = []
    pilot_start = config.burn_in // 2

    def loglik(p, e):
        # e is the active block eps[:N]
        total = family.obs(p, e[:n]).sum()
        if len(e) > n:
            total += family.miss(p, e[n:]).sum()
        return total

    def extra(name, p):
        aff = family.affects[name]
        total = 0.0
        if "obs" in aff or "miss" in aff:
            total += loglik(p, eps[:N])
        if "dens" in aff:
            total += family.dens(p, eps[:N]).sum()
        return total

    def log_prior_part(m: int) -> float:
        lp = log_prior_N(m, priors)
        return lp + log_falling_factorial(m, n) if lp > -math.inf else lp

    def joint_step(trial: dict, log_ratio: float, transform, log_jac: float) -> bool:
        """Move the parameters, transform the shared active effects and redraw N.

        N' = n + NB(n, p*(trial)); slots below min(N, N') are transformed (with
        Jacobian exp(log_jac) each), slots between N and N' switch on or off
        and are scored against the pseudo-prior, the rest are untouched.
        """
        nonlocal N
        if log_ratio == -math.inf:
            return False
        lu_old, lu_new = family.log_unobserved(params), family.log_unobserved(trial)
        if not lu_new < 0:
            return False
        N_new = n + int(rng.negative_binomial(n, -math.expm1(lu_new)))
        if N_new > M:
            return False
        lp_new = log_prior_part(N_new)
        if lp_new == -math.inf:
            return False
        m = min(N, N_new)
        common = eps[:m]
        moved = transform(common)
        log_ratio += (lp_new - log_prior_part(N)
                      + negbin_logpmf(N - n, n, lu_old) - negbin_logpmf(N_new - n, n, lu_new)
                      + loglik(trial, moved) - loglik(params, common)
                      + family.dens(trial, moved).sum() - family.dens(params, common).sum()
                      + m * log_jac)
        if N_new > N:
            seg = eps[N:N_new]
            log_ratio += (family.miss(trial, seg) + family.dens(trial, seg) - family.pseudo_logpdf(pp, seg)).sum()
        elif N_new < N:
            seg = eps[N_new:N]
            log_ratio -= (family.miss(params, seg) + family.dens(params, seg) - family.pseudo_logpdf(pp, seg)).sum()
        if math.log(rng.random()) < log_ratio:
            params.update(trial)
            eps[:m] = moved
            N = N_new
            return True
        return False

    recorder = TraceRecorder(["N", *family.param_names], config)
    start = time.perf_counter()
    for it in range(1, config.iterations + 1):
        update_scalar_params(family, params, extra, adapters, it, rng, fixed)
        if block is not None:
            trial, log_ratio, factor = block.propose(params, rng)
            block.record(it, joint_step(trial, log_ratio, lambda e: e * factor, math.log(factor)))
        if shift is not None:
            name = family.location_param
            d = float(shift.adapter.scale[0]) * rng.standard_normal()
            trial = dict(params)
            trial[name] = params[name] + d
            log_ratio = family.log_prior(name, trial[name]) - family.log_prior(name, params[name])
            shift.adapter.update(it, float(joint_step(trial, log_ratio, lambda e: e - d, 0.0)))

        # effects of active slots by MH, inactive ones drawn from the pseudo-prior
        prop = family.propose(eps[:N], eps_adapter.scale[:N], rng)
        lp_cur = family.dens(params, eps[:N])
        lp_prop = family.dens(params, prop)
        lp_cur[:n] += family.obs(params, eps[:n])
        lp_prop[:n] += family.obs(params, prop[:n])
        lp_cur[n:] += family.miss(params, eps[n:N])
        lp_prop[n:] += family.miss(params, prop[n:])
        acc_active = vector_rw_accept(lp_prop, lp_cur, rng)
        eps[:N][acc_active] = prop[acc_active]
        acc = np.zeros(M, dtype=bool)
        acc[:N] = acc_active
        tried = np.zeros(M)
        tried[:N] = 1.0
        eps_adapter.update(it, acc, tried)
        if N < M:
            eps[N:] = family.pseudo_draw(pp, M - N, rng)

        if "N" not in fixed:
            delta = max(1, int(round(n_adapter.scale[0])))
            step = int(rng.integers(1, delta + 1))
            up = rng.random() < 0.5
            prop_N = N + step if up else N - step
            accepted = False
            if n <= prop_N <= M:
                lp_new = log_prior_part(prop_N)
                if lp_new > -math.inf:
                    lo, hi = (N, prop_N) if up else (prop_N, N)
                    seg = eps[lo:hi]
                    # switching slots lo..hi-1 on: population terms replace pseudo-prior terms
                    gain = (family.miss(params, seg) + family.dens(params, seg)
                            - family.pseudo_logpdf(pp, seg)).sum()
                    log_ratio = lp_new - log_prior_part(N) + (gain if up else -gain)
                    if math.log(rng.random()) < log_ratio:
                        N = prop_N
                        accepted = True
            n_adapter.update(it, float(accepted))

        if fit_pp and pilot_start < it <= config.burn_in and N > n:
            pilot.append(np.array(eps[n:N], copy=True))
        if fit_pp and it == config.burn_in:
            if pilot:
                pp = family.fit_pseudo_prior(np.concatenate(pilot))
            pilot = []
            if N < M:
                eps[N:] = family.pseudo_draw(pp, M - N, rng)

        recorder.maybe_record(it, [N, *(params[k] for k in family.param_names)])

    wall = time.perf_counter() - start
    acceptance = {name: adapters[name].rate() for name in family.param_names}
    acceptance["eps"] = eps_adapter.rate()
    acceptance["N"] = n_adapter.rate()
    if block is not None:
        acceptance["block"] = block.adapter.rate()
    if shift is not None:
        acceptance["shift"] = shift.adapter.rate()
    trace = recorder.finish(chain, acceptance, wall)
    trace.meta["pseudo_prior"] = pp
    return trace


def _check(data: CaptureData, M: int) -> None:
    if data.n < 1:
        raise DataError("no observed individuals")
    if M < data.n:
        raise DataError(f"super-population size M = {M} is below n = {data.n}")


def run_cdr(data: CaptureData, geometry: SurveyGeometry | None = None,
            priors: PriorSpec | None = None, config: SamplerConfig | None = None,
            family: Family | None = None, chain_ids=None) -> list[Trace]:
    priors = priors or PriorSpec()
    config = config or SamplerConfig()
    _check(data, config.M)
    family = family or make_family(data, geometry, priors, config.q)
    return [_cdr_chain(family, config, c) for c in chain_indices(config, chain_ids)]


def run_cdde(data: CaptureData, geometry: SurveyGeometry | None = None,
             priors: PriorSpec | None = None, config: SamplerConfig | None = None,
             family: Family | None = None, pseudo_prior=None,
             chain_ids=None) -> list[Trace]:
    """``pseudo_prior`` fixes the pseudo-prior instead of fitting it during burn-in."""
    priors = priors or PriorSpec()
    config = config or SamplerConfig()
    _check(data, config.M)
    if not isinstance(priors.n_prior, (TruncJeffreys, Power, Poisson, NegBinomial)):
        raise DataError("CD:DE needs an explicit prior on N")
    family = family or make_family(data, geometry, priors, config.q)
    return [_cdde_chain(family, config, c, pseudo_prior) for c in chain_indices(config, chain_ids)]
