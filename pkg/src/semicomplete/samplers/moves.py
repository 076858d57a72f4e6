"""Joint parameter/effect moves that complement the single-site updates.

Under a random-effects model the intercept and the effect scale are
strongly tied to the effects themselves; moving them one at a time with
the effects held fixed mixes slowly. Both moves here change the parameters
together with the effects so that the capture probabilities are preserved
(shift) or the effect density is preserved (scale):

* ``BlockMove``: all scalar parameters jointly, with the effects rescaled by
  the change in their standard deviation when the family has a scale
  parameter.
* ``ShiftMove``: intercept + d with every effect - d.

Each move takes two callbacks supplied by the sampler:

``loglik(params, eps)``
    Sum of the likelihood terms that depend on the effects, excluding
    the effect density.
``coupled(old, new)``
    Change in the remaining parameter-dependent terms (p* and N). Returns
    ``(log_delta, commit)``; ``commit()`` is called on acceptance, which
    lets a sampler co-propose N with the parameters.
"""

from __future__ import annotations

import math

import numpy as np

from .core import SamplerConfig, ScaleAdapter, ScaleAdapterConfig


def no_commit() -> None:
    return None


class BlockMove:
    """Random-walk move of all scalar parameters (log scale where positive).

    The proposal covariance is estimated from the second half of the
    burn-in draws every ``refresh`` sweeps and frozen afterwards.
    """

    refresh = 500

    def __init__(self, family, config: SamplerConfig):
        self.family = family
        self.names = family.param_names
        d = len(self.names)
        self.burn_in = config.burn_in
        self.adapter = ScaleAdapter(2.38 / math.sqrt(d), ScaleAdapterConfig(config, 0.234))
        self.chol = np.eye(d) * 0.3
        self.history: list[np.ndarray] = []

    def _to_vec(self, params: dict) -> np.ndarray:
        f = self.family
        return np.array([math.log(params[k]) if k in f.log_params else params[k] for k in self.names])

    def _log_prior(self, vec: np.ndarray) -> float:
        f = self.family
        total = 0.0
        for k, v in zip(self.names, vec):
            on_log = k in f.log_params
            if on_log and v > 700.0:
                return -math.inf
            total += f.log_prior(k, math.exp(v) if on_log else v) + (v if on_log else 0.0)
        return total

    def propose(self, params: dict, rng: np.random.Generator) -> tuple[dict, float, float]:
        """(trial params, log prior ratio, effect scale factor); -inf ratio if off support."""
        f = self.family
        cur = self._to_vec(params)
        prop = cur + float(self.adapter.scale[0]) * (self.chol @ rng.standard_normal(len(cur)))
        self._cur, self._prop = cur, prop
        lp_new = self._log_prior(prop)
        if lp_new == -math.inf:
            return params, -math.inf, 1.0
        trial = dict(params)
        for k, v in zip(self.names, prop):
            trial[k] = math.exp(v) if k in f.log_params else v
        factor = 1.0
        if f.scale_param is not None:
            factor = math.sqrt(trial[f.scale_param] / params[f.scale_param])
        return trial, lp_new - self._log_prior(cur), factor

    def record(self, it: int, accepted: bool) -> None:
        """Adapt the scale and, during burn-in, the proposal covariance."""
        cur = self._prop if accepted else self._cur
        self.adapter.update(it, float(accepted))
        if it <= self.burn_in:
            self.history.append(cur)
            if it % self.refresh == 0 and len(self.history) >= 200:
                h = np.array(self.history[len(self.history) // 2:])
                d = len(cur)
                cov = np.cov(h.T).reshape(d, d) + 1e-8 * np.eye(d)
                try:
                    self.chol = np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    pass
            if it == self.burn_in:
                self.history = []

    def step(self, it: int, params: dict, eps: np.ndarray, loglik, coupled,
             rng: np.random.Generator) -> bool:
        f = self.family
        trial, log_ratio, factor = self.propose(params, rng)
        accepted = False
        if log_ratio > -math.inf:
            eps_new = eps * factor
            delta, commit = coupled(params, trial)
            log_ratio += delta
            if log_ratio > -math.inf:
                log_ratio += loglik(trial, eps_new) - loglik(params, eps)
                if f.scale_param is None:
                    log_ratio += f.dens(trial, eps).sum() - f.dens(params, eps).sum()
                if math.log(rng.random()) < log_ratio:
                    params.update(trial)
                    eps *= factor
                    commit()
                    accepted = True
        self.record(it, accepted)
        return accepted


class ShiftMove:
    """alpha + d, eps - d: capture probabilities of every effect are unchanged."""

    def __init__(self, family, config: SamplerConfig):
        self.family = family
        self.adapter = ScaleAdapter(0.3, config)

    def step(self, it: int, params: dict, eps: np.ndarray, coupled,
             rng: np.random.Generator) -> bool:
        f = self.family
        name = f.location_param
        d = float(self.adapter.scale[0]) * rng.standard_normal()
        trial = dict(params)
        trial[name] = params[name] + d
        delta, commit = coupled(params, trial)
        log_ratio = f.log_prior(name, trial[name]) - f.log_prior(name, params[name]) + delta
        accepted = False
        if log_ratio > -math.inf:
            log_ratio += f.dens(params, eps - d).sum() - f.dens(params, eps).sum()
            if math.log(rng.random()) < log_ratio:
                params[name] = trial[name]
                eps -= d
                commit()
                accepted = True
        self.adapter.update(it, float(accepted))
        return accepted


def make_moves(family, config: SamplerConfig, fixed=()) -> tuple[BlockMove | None, ShiftMove | None]:
    """Moves applicable to ``family``; none when any parameter is held fixed."""
    if fixed and set(fixed) & set(family.param_names):
        return None, None
    block = BlockMove(family, config) if len(family.param_names) > 1 else None
    shift = ShiftMove(family, config) if family.location_param is not None else None
    return block, shift


__all__ = ["BlockMove", "ShiftMove", "make_moves", "no_commit"]
