"""Log-densities: conditional, semi-complete, complete-data and marginal likelihoods, and priors.

Every function returns a float log-density; ``-inf`` encodes zero density.
The multinomial coefficient is N!/(N-n)! throughout.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, xlogy

from .integrate import SQRT_PI, QuadratureRule, mh_prob_unobserved, secr_prob_unobserved
from .model import (
    CaptureData,
    FrequencyCounts,
    MhState,
    NegBinomial,
    NPrior,
    Poisson,
    Power,
    PriorSpec,
    SecrState,
    SuperPopState,
    SurveyGeometry,
    TruncJeffreys,
    derive_counts,
)

LOG_2PI = math.log(2.0 * math.pi)


def log_falling_factorial(N: int, n: int) -> float:
    """ln N!/(N-n)!."""
    if n < 0 or N < n:
        raise ValueError(f"need N >= n >= 0, got N={N}, n={n}")
    if n == 0:
        return 0.0
    return math.lgamma(N + 1) - math.lgamma(N - n + 1)


# -- per-individual building blocks (vectorised, shared with the samplers) --

def logit_loglik(y: np.ndarray, T: int, eta: np.ndarray) -> np.ndarray:
    """y ln p + (T - y) ln(1 - p) with logit p = eta, elementwise."""
    return -y * np.logaddexp(0.0, -eta) - (T - y) * np.logaddexp(0.0, eta)


def logit_logmiss(T: int, eta: np.ndarray) -> np.ndarray:
    """T ln(1 - p): log-probability of an all-zero history."""
    return -T * np.logaddexp(0.0, eta)


def normal_logpdf(x, var: float):
    return -0.5 * (LOG_2PI + math.log(var)) - 0.5 * np.square(x) / var


def secr_detection_counts(data: CaptureData) -> np.ndarray:
    """n x J matrix of detection counts summed over occasions."""
    if not data.spatial:
        raise ValueError("SECR likelihood needs n x J x T histories")
    return data.histories.sum(axis=2).astype(float)


def sq_distances(centres: np.ndarray, detectors: np.ndarray) -> np.ndarray:
    c = np.atleast_2d(centres)
    dx = c[:, 0, None] - detectors[None, :, 0]
    dy = c[:, 1, None] - detectors[None, :, 1]
    return dx * dx + dy * dy


def halfnormal_loglik(counts: np.ndarray, T: int, d2: np.ndarray, sigma: float) -> np.ndarray:
    """Per-individual sum_j [c_ij ln p_ij + (T - c_ij) ln(1 - p_ij)], p = exp(-d^2 / 2 sigma^2)."""
    logp = d2 * (-0.5 / (sigma * sigma))
    with np.errstate(divide="ignore", invalid="ignore"):
        log1mp = np.log(-np.expm1(logp))
        # 0 * -inf: undetected at zero distance has probability 0, not nan
        miss = np.where(counts < T, (T - counts) * log1mp, 0.0)
    return (counts * logp + miss).sum(axis=1)


def halfnormal_logmiss(T: int, d2: np.ndarray, sigma: float) -> np.ndarray:
    """Per-individual T sum_j ln(1 - p_ij)."""
    with np.errstate(divide="ignore"):
        return T * np.log(-np.expm1(d2 * (-0.5 / (sigma * sigma)))).sum(axis=1)


# -- conditional likelihoods ------------------------------------------------

def mh_conditional_loglik(data: CaptureData, alpha: float, eps: np.ndarray) -> float:
    y, _ = derive_counts(data)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != y.shape:
        raise ValueError(f"eps has length {eps.size}, expected n = {y.size}")
    return float(logit_loglik(y, data.T, alpha + eps).sum())


def secr_conditional_loglik(data: CaptureData, geometry: SurveyGeometry, sigma: float,
                            centres: np.ndarray) -> float:
    counts = secr_detection_counts(data)
    if counts.shape[1] != geometry.J:
        raise ValueError(f"histories have {counts.shape[1]} detectors, geometry has {geometry.J}")
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    if centres.shape != (data.n, 2):
        raise ValueError(f"centres shape {centres.shape} != ({data.n}, 2)")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d2 = sq_distances(centres, geometry.detectors)
    return float(halfnormal_loglik(counts, data.T, d2, sigma).sum())


# -- priors -----------------------------------------------------------------

def log_prior_N(N: int, spec: NPrior | PriorSpec) -> float:
    prior = spec.n_prior if isinstance(spec, PriorSpec) else spec
    if N < 0:
        return -math.inf
    if isinstance(prior, TruncJeffreys):
        return -math.log(N) if 1 <= N <= prior.M else -math.inf
    if isinstance(prior, Power):
        return -prior.c * math.log(N) if 1 <= N <= prior.M else -math.inf
    if isinstance(prior, Poisson):
        return N * math.log(prior.lam) - prior.lam - math.lgamma(N + 1)
    if isinstance(prior, NegBinomial):
        r, p = prior.r, prior.p
        return (math.lgamma(N + r) - math.lgamma(N + 1) - math.lgamma(r)
                + r * math.log(p) + float(xlogy(N, 1.0 - p)))
    raise ValueError(f"unsupported N prior {prior!r}")


def log_prior_alpha(alpha: float, priors: PriorSpec) -> float:
    pr = priors.alpha_prior
    return float(normal_logpdf(alpha - pr.mean, pr.var))


def log_prior_sigma2(sigma2: float, priors: PriorSpec) -> float:
    if not sigma2 > 0:
        return -math.inf
    a, b = priors.sigma2_prior.shape, priors.sigma2_prior.scale
    return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(sigma2) - b / sigma2


def log_prior_sigma(sigma: float, priors: PriorSpec) -> float:
    lo, hi = priors.sigma_prior.low, priors.sigma_prior.high
    return -math.log(hi - lo) if lo < sigma <= hi else -math.inf


def log_prior_psi(psi: float, priors: PriorSpec) -> float:
    if not 0.0 < psi < 1.0:
        return -math.inf
    a, b = priors.psi_prior.a, priors.psi_prior.b
    return ((a - 1.0) * math.log(psi) + (b - 1.0) * math.log1p(-psi)
            + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))


def log_centre_density(centres: np.ndarray, geometry: SurveyGeometry) -> np.ndarray:
    """Uniform activity-centre density 1/A on S, per centre."""
    inside = geometry.contains(centres)
    return np.where(inside, -math.log(geometry.area), -np.inf)


# -- semi-complete data likelihood ------------------------------------------

def _prob_unobserved(state, data: CaptureData, geometry, rule) -> float:
    if isinstance(state, MhState):
        if rule is None:
            raise ValueError("M_h needs a quadrature rule")
        return mh_prob_unobserved(state.alpha, math.sqrt(state.sigma2), data.T, rule)
    if geometry is None:
        raise ValueError("SECR needs a survey geometry")
    return secr_prob_unobserved(state.sigma, geometry, data.T)


def _observed_parts(state, data: CaptureData, geometry) -> tuple[float, float]:
    """(conditional log-likelihood, sum of log heterogeneity densities) for i <= n."""
    if isinstance(state, MhState):
        if not state.sigma2 > 0:
            return -math.inf, -math.inf
        cond = mh_conditional_loglik(data, state.alpha, state.eps)
        return cond, float(normal_logpdf(np.asarray(state.eps), state.sigma2).sum())
    if isinstance(state, SecrState):
        if not state.sigma > 0:
            return -math.inf, -math.inf
        cond = secr_conditional_loglik(data, geometry, state.sigma, state.centres)
        return cond, float(log_centre_density(state.centres, geometry).sum())
    raise TypeError(f"unsupported state {type(state).__name__}")


def _param_log_prior(state, priors: PriorSpec) -> float:
    if isinstance(state, MhState):
        return log_prior_alpha(state.alpha, priors) + log_prior_sigma2(state.sigma2, priors)
    return log_prior_sigma(state.sigma, priors)


def scd_loglik(state, data: CaptureData, geometry: SurveyGeometry | None = None,
               rule: QuadratureRule | None = None, *, p_unobserved: float | None = None) -> float:
    """Semi-complete data log-likelihood, product form.

    cond. loglik + ln N!/(N-n)! + (N-n) ln(1-p*) + sum_i ln f_eps(eps_i).
    ``p_unobserved`` overrides the 1 - p* integral.
    """
    n = data.n
    if state.N < n:
        return -math.inf
    cond, dens = _observed_parts(state, data, geometry)
    if not (math.isfinite(cond) and math.isfinite(dens)):
        return -math.inf
    miss = _prob_unobserved(state, data, geometry, rule) if p_unobserved is None else p_unobserved
    return cond + log_falling_factorial(state.N, n) + float(xlogy(state.N - n, miss)) + dens


def scd_logposterior(state, data: CaptureData, priors: PriorSpec,
                     rule: QuadratureRule | None = None, geometry: SurveyGeometry | None = None,
                     *, p_unobserved: float | None = None) -> float:
    lp = log_prior_N(state.N, priors) + _param_log_prior(state, priors)
    if lp == -math.inf:
        return -math.inf
    return scd_loglik(state, data, geometry, rule, p_unobserved=p_unobserved) + lp


def scd_logposterior_binomial_form(state, data: CaptureData, priors: PriorSpec,
                                   rule: QuadratureRule | None = None,
                                   geometry: SurveyGeometry | None = None,
                                   *, p_unobserved: float | None = None) -> float:
    """Same density arranged as (p*)^-n cond. lik. times a Binomial(N, p*) count term."""
    n = data.n
    if state.N < n:
        return -math.inf
    lp = log_prior_N(state.N, priors) + _param_log_prior(state, priors)
    if lp == -math.inf:
        return -math.inf
    cond, dens = _observed_parts(state, data, geometry)
    if not (math.isfinite(cond) and math.isfinite(dens)):
        return -math.inf
    miss = _prob_unobserved(state, data, geometry, rule) if p_unobserved is None else p_unobserved
    p_star = 1.0 - miss
    if p_star <= 0.0 and n > 0:
        return -math.inf
    log_p_star = math.log(p_star) if n > 0 else 0.0
    detected_given_seen = cond - n * log_p_star
    binomial = log_falling_factorial(state.N, n) + n * log_p_star + float(xlogy(state.N - n, miss))
    return detected_given_seen + binomial + dens + lp


# -- marginal likelihood (M_h) ----------------------------------------------

def mh_marginal_loglik(freqs: FrequencyCounts, N: int, alpha: float, sigma: float,
                       rule: QuadratureRule) -> float:
    """ln N!/(N-n)! + sum_{k=0..T} n_k ln E[p^k (1-p)^(T-k)], n_0 = N - n."""
    n, T = freqs.n, freqs.T
    if N < n:
        raise ValueError(f"N = {N} < n = {n}")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    eta = math.sqrt(2.0) * sigma * rule.nodes + alpha
    total = log_falling_factorial(N, n)
    counts = (N - n,) + freqs.counts
    for k, nk in enumerate(counts):
        if nk == 0:
            continue
        integrand = np.exp(logit_loglik(k, T, eta))
        total += nk * math.log(np.dot(rule.weights, integrand) / SQRT_PI)
    return total


# -- complete data likelihood (super-population) ----------------------------

def complete_data_loglik(superstate: SuperPopState, data: CaptureData,
                         geometry: SurveyGeometry | None = None,
                         pseudo_prior=None) -> float:
    """Bernoulli x_i ~ Bern(z_i p_i) terms over all M slots plus heterogeneity densities.

    z = 0 slots contribute only their heterogeneity density, scored under
    ``pseudo_prior`` (a callable eps -> log-density vector) when given,
    otherwise under the population density. The N!/(N-n)! factor is not
    included.
    """
    n, T, M = data.n, data.T, superstate.M
    z = np.asarray(superstate.z)
    if M < n or len(z) != M:
        raise ValueError("need M >= n and len(z) == M")
    if (z[:n] != 1).any():
        raise ValueError("z_i = 0 for an observed individual")
    eps = np.asarray(superstate.eps_full, dtype=float)
    active = z.astype(bool)
    unobs = active.copy()
    unobs[:n] = False
    off = ~active
    total = 0.0
    if data.spatial:
        sigma = superstate.params["sigma"]
        counts = secr_detection_counts(data)
        total += halfnormal_loglik(counts, T, sq_distances(eps[:n], geometry.detectors), sigma).sum()
        if unobs.any():
            total += halfnormal_logmiss(T, sq_distances(eps[unobs], geometry.detectors), sigma).sum()
        dens = log_centre_density(eps, geometry)
    else:
        alpha, sigma2 = superstate.params["alpha"], superstate.params["sigma2"]
        y, _ = derive_counts(data)
        total += logit_loglik(y, T, alpha + eps[:n]).sum()
        total += logit_logmiss(T, alpha + eps[unobs]).sum()
        dens = normal_logpdf(eps, sigma2)
    total += dens[active].sum()
    if off.any():
        total += (pseudo_prior(eps[off]) if pseudo_prior is not None else dens[off]).sum()
    return float(total)
