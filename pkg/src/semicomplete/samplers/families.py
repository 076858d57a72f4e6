"""Model families: per-individual likelihood pieces for M_h and SECR.

Samplers are written once against this interface. Heterogeneity terms
``eps`` are a float vector (M_h) or an (k, 2) array of activity centres
(SECR).
"""

from __future__ import annotations

import math

import numpy as np

from ..integrate import TabulatedMaskIntegrator, gauss_hermite_rule, mh_prob_unobserved
from ..likelihood import (
    halfnormal_loglik,
    halfnormal_logmiss,
    log_centre_density,
    log_prior_alpha,
    log_prior_sigma,
    log_prior_sigma2,
    logit_loglik,
    logit_logmiss,
    normal_logpdf,
    secr_detection_counts,
    sq_distances,
)
from ..model import CaptureData, DataError, PriorSpec, SurveyGeometry, derive_counts


class Family:
    param_names: tuple[str, ...] = ()
    # parameters updated on the log scale
    log_params: frozenset[str] = frozenset()
    # which likelihood pieces each parameter enters: obs, miss, dens, pstar
    affects: dict[str, frozenset[str]] = {}

    def __init__(self, data: CaptureData, priors: PriorSpec):
        self.data = data
        self.priors = priors
        self.n = data.n
        self.T = data.T
        self._cache: dict[tuple, float] = {}
        self.recompute = False

    def log_unobserved(self, params: dict) -> float:
        """ln(1 - p*), memoised on the parameter values (two most recent)."""
        key = tuple(params[k] for k in self.pstar_keys)
        if not self.recompute and key in self._cache:
            return self._cache[key]
        miss = self.prob_unobserved(params)
        val = math.log(miss) if miss > 0 else -math.inf
        if len(self._cache) >= 2:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = val
        return val

    def initial_scale(self, name: str) -> float:
        return 0.5

    # parameter whose joint rescaling with the effects leaves their density invariant
    scale_param: str | None = None
    # intercept that can trade off against a common shift of the effects
    location_param: str | None = None


class MhFamily(Family):
    param_names = ("alpha", "sigma2")
    log_params = frozenset({"sigma2"})
    affects = {
        "alpha": frozenset({"obs", "miss", "pstar"}),
        "sigma2": frozenset({"dens", "pstar"}),
    }
    pstar_keys = ("alpha", "sigma2")
    eps_dim = 1
    scale_param = "sigma2"
    location_param = "alpha"

    def __init__(self, data: CaptureData, priors: PriorSpec, q: int = 100):
        if data.spatial:
            raise DataError("M_h needs an n x T history matrix")
        super().__init__(data, priors)
        self.y, self.freqs = derive_counts(data)
        self.y = self.y.astype(float)
        self.rule = gauss_hermite_rule(q)

    def log_prior(self, name: str, value: float) -> float:
        if name == "alpha":
            return log_prior_alpha(value, self.priors)
        return log_prior_sigma2(value, self.priors)

    def init_params(self, rng: np.random.Generator) -> dict:
        pbar = min(max(self.y.mean() / self.T, 0.05), 0.95)
        return {
            "alpha": math.log(pbar / (1 - pbar)) + rng.normal(0.0, 0.5),
            "sigma2": math.exp(rng.normal(0.0, 0.5)),
        }

    def prob_unobserved(self, params: dict) -> float:
        return mh_prob_unobserved(params["alpha"], math.sqrt(params["sigma2"]), self.T, self.rule)

    def obs(self, params: dict, eps: np.ndarray) -> np.ndarray:
        return logit_loglik(self.y, self.T, params["alpha"] + eps)

    def miss(self, params: dict, eps: np.ndarray) -> np.ndarray:
        return logit_logmiss(self.T, params["alpha"] + eps)

    def dens(self, params: dict, eps: np.ndarray) -> np.ndarray:
        return normal_logpdf(eps, params["sigma2"])

    def propose(self, eps: np.ndarray, scales: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return eps + scales * rng.standard_normal(len(eps))

    def init_obs_eps(self, params: dict, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.n)

    def draw_eps(self, params: dict, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(params["sigma2"]), size)

    def eps_scale(self, params: dict) -> float:
        return 1.0

    # pseudo-prior for CD:DE: a normal fitted to pilot draws
    def default_pseudo_prior(self):
        return (0.0, 1.0)

    def fit_pseudo_prior(self, draws: np.ndarray):
        if len(draws) < 10:
            return self.default_pseudo_prior()
        return (float(draws.mean()), float(max(draws.std(), 1e-3)))

    def pseudo_logpdf(self, pp, eps: np.ndarray) -> np.ndarray:
        mu, sd = pp
        return normal_logpdf(eps - mu, sd * sd)

    def pseudo_draw(self, pp, size: int, rng: np.random.Generator) -> np.ndarray:
        mu, sd = pp
        return rng.normal(mu, sd, size)

    def empty_eps(self, size: int) -> np.ndarray:
        return np.zeros(size)


class SecrFamily(Family):
    param_names = ("sigma",)
    log_params = frozenset({"sigma"})
    affects = {"sigma": frozenset({"obs", "miss", "pstar"})}
    pstar_keys = ("sigma",)
    eps_dim = 2

    def __init__(self, data: CaptureData, geometry: SurveyGeometry, priors: PriorSpec):
        if not data.spatial:
            raise DataError("SECR needs n x J x T histories")
        if data.J != geometry.J:
            raise DataError(f"histories have {data.J} detectors, geometry has {geometry.J}")
        super().__init__(data, priors)
        derive_counts(data)
        self.geometry = geometry
        self.counts = secr_detection_counts(data)
        self.det = geometry.detectors
        hi = priors.sigma_prior.high
        self.integrator = TabulatedMaskIntegrator(geometry, data.T, max(geometry.spacing / 10, hi * 1e-4), hi)

    def log_prior(self, name: str, value: float) -> float:
        return log_prior_sigma(value, self.priors)

    def init_params(self, rng: np.random.Generator) -> dict:
        hi = self.priors.sigma_prior.high
        return {"sigma": min(self.geometry.spacing * 2.0 * math.exp(rng.normal(0.0, 0.3)), 0.9 * hi)}

    def prob_unobserved(self, params: dict) -> float:
        return self.integrator.prob_unobserved(params["sigma"])

    def obs(self, params: dict, c: np.ndarray) -> np.ndarray:
        return halfnormal_loglik(self.counts, self.T, sq_distances(c, self.det), params["sigma"])

    def miss(self, params: dict, c: np.ndarray) -> np.ndarray:
        return halfnormal_logmiss(self.T, sq_distances(c, self.det), params["sigma"])

    def dens(self, params: dict, c: np.ndarray) -> np.ndarray:
        return log_centre_density(c, self.geometry)

    def propose(self, c: np.ndarray, scales: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return c + scales[:, None] * rng.standard_normal((len(c), 2))

    def init_obs_eps(self, params: dict, rng: np.random.Generator) -> np.ndarray:
        w = self.counts / self.counts.sum(axis=1, keepdims=True)
        c = w @ self.det + rng.normal(0.0, 0.1, (self.n, 2))
        lo, hi = self.geometry.bounds
        c = np.clip(c, lo + 1e-9, hi - 1e-9)
        outside = ~self.geometry.contains(c)
        if outside.any():
            c[outside] = self.geometry.mask[
                np.argmin(((self.geometry.mask[None] - c[outside][:, None]) ** 2).sum(-1), axis=1)]
        return c

    def draw_eps(self, params: dict, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.geometry.sample_points(size, rng)

    def eps_scale(self, params: dict) -> float:
        return params["sigma"]

    # the pseudo-prior for activity centres is uniform over the mask region
    def default_pseudo_prior(self):
        return None

    def fit_pseudo_prior(self, draws: np.ndarray):
        return None

    def pseudo_logpdf(self, pp, c: np.ndarray) -> np.ndarray:
        return log_centre_density(c, self.geometry)

    def pseudo_draw(self, pp, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.geometry.sample_points(size, rng)

    def empty_eps(self, size: int) -> np.ndarray:
        return np.zeros((size, 2))


def make_family(data: CaptureData, geometry: SurveyGeometry | None, priors: PriorSpec,
                q: int = 100) -> Family:
    if data.spatial:
        if geometry is None:
            raise DataError("SECR data needs a survey geometry")
        return SecrFamily(data, geometry, priors)
    return MhFamily(data, priors, q)
