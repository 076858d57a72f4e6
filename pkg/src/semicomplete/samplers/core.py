"""Shared MCMC machinery: configuration, traces, RNG streams, kernels and adaptation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..model import DataError


@dataclass(frozen=True)
class SamplerConfig:
    """Run lengths count every sweep, burn-in included.

    ``fixed`` names parameters (``alpha``, ``sigma2``, ``sigma``, ``N``) held at
    their initial values, and ``init`` pins initial values; both exist for
    validation runs against analytic oracles.
    """

    iterations: int = 20_000
    burn_in: int = 2_000
    thin: int = 1
    chains: int = 3
    seed: int = 1
    M: int = 1000
    q: int = 100
    adapt_target: float = 0.44
    adapt_window: int = 50
    recompute_pstar: bool = False
    fixed: tuple[str, ...] = ()
    init: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise DataError("need iterations > burn_in >= 0")
        if self.thin < 1 or self.chains < 1:
            raise DataError("thin and chains must be >= 1")
        if not 0 < self.adapt_target < 1 or self.adapt_window < 1:
            raise DataError("adapt_target must be in (0, 1) and adapt_window >= 1")
        if not 0 <= self.seed < 2**64:
            raise DataError("seed must be a 64-bit unsigned integer")

    @property
    def n_stored(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class Trace:
    """Stored post-burn-in samples of one chain."""

    samples: dict[str, np.ndarray]
    chain: int
    seed: int
    burn_in: int
    thin: int
    acceptance: dict[str, float] = field(default_factory=dict)
    wall_seconds: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def names(self) -> list[str]:
        return list(self.samples)

    def __len__(self) -> int:
        return len(next(iter(self.samples.values()))) if self.samples else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.samples[name]


class TraceRecorder:
    def __init__(self, names: list[str], config: SamplerConfig):
        self.config = config
        self.names = list(names)
        self.buf = np.empty((config.n_stored, len(names)))
        self.k = 0

    def maybe_record(self, it: int, values) -> None:
        """``it`` is the 1-based sweep number."""
        c = self.config
        if it > c.burn_in and (it - c.burn_in) % c.thin == 0 and self.k < len(self.buf):
            self.buf[self.k] = values
            self.k += 1

    def finish(self, chain: int, acceptance: dict[str, float], wall: float) -> Trace:
        samples = {name: self.buf[: self.k, j].copy() for j, name in enumerate(self.names)}
        if "N" in samples:
            samples["N"] = samples["N"].astype(np.int64)
        return Trace(samples, chain, self.config.seed, self.config.burn_in, self.config.thin,
                     acceptance, wall)


def chain_indices(config: SamplerConfig, chain_ids=None) -> list[int]:
    """Chains to run: all of them, or the given subset (for parallel dispatch)."""
    if chain_ids is None:
        return list(range(config.chains))
    ids = [int(c) for c in chain_ids]
    if any(not 0 <= c < config.chains for c in ids):
        raise DataError(f"chain ids must lie in 0..{config.chains - 1}")
    return ids


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent PCG64 stream for ``chain``: SeedSequence(seed, spawn_key=(chain,)).

    This equals ``SeedSequence(seed).spawn(chain + 1)[chain]``.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain,))))


def adaptive_rw_update(current: float, log_target, scale: float, rng: np.random.Generator,
                       current_logp: float | None = None) -> tuple[float, bool]:
    """One Gaussian random-walk Metropolis step for a scalar."""
    lp_cur = log_target(current) if current_logp is None else current_logp
    assert lp_cur > -math.inf, "chain is at a zero-density state"
    proposal = current + scale * rng.standard_normal()
    lp_prop = log_target(proposal)
    if lp_prop == -math.inf:
        return current, False
    if math.log(rng.random()) < lp_prop - lp_cur:
        return proposal, True
    return current, False


def vector_rw_accept(lp_prop: np.ndarray, lp_cur: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Metropolis accept/reject decisions for a block of scalar updates."""
    u = rng.random(lp_cur.shape)
    with np.errstate(invalid="ignore"):
        return np.log(u) < lp_prop - lp_cur


def gibbs_update_N_negbin(n: int, p_star: float, rng: np.random.Generator) -> int:
    """N = n + X, X ~ NegBin(n, p*): f(x) = (x+n-1)!/(x!(n-1)!) p*^n (1-p*)^x."""
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0.0 < p_star <= 1.0:
        raise ValueError(f"p* = {p_star}: expected unobserved count is unbounded")
    if p_star == 1.0:
        return n
    return n + int(rng.negative_binomial(n, p_star))


def gibbs_update_psi(a: float, b: float, n_in: int, M: int, rng: np.random.Generator) -> float:
    return float(rng.beta(a + n_in, b + M - n_in))


def gibbs_update_z(log_q: np.ndarray, psi: float, rng: np.random.Generator) -> np.ndarray:
    """z_i ~ Bern(psi q_i / (psi q_i + 1 - psi)), q_i the all-zero history probability."""
    q = np.exp(log_q)
    prob = psi * q / (psi * q + (1.0 - psi))
    return (rng.random(len(q)) < prob).astype(np.int8)


@dataclass(frozen=True)
class ScaleAdapterConfig:
    """Adapter settings taken from a sampler config with another target rate."""

    base: SamplerConfig
    adapt_target: float

    @property
    def adapt_window(self) -> int:
        return self.base.adapt_window

    @property
    def burn_in(self) -> int:
        return self.base.burn_in


class ScaleAdapter:
    """Robbins-Monro tuning of log proposal scales toward a target acceptance rate.

    Scales change only at window boundaries during burn-in; afterwards they
    are frozen. Entries not tried within a window keep their scale.
    """

    def __init__(self, init_scale, config: SamplerConfig):
        self.log_scale = np.log(np.atleast_1d(np.asarray(init_scale, dtype=float))).copy()
        self.target = config.adapt_target
        self.window = config.adapt_window
        self.burn_in = config.burn_in
        self.acc = np.zeros_like(self.log_scale)
        self.tries = np.zeros_like(self.log_scale)
        self.batch = 0
        self.total_acc = 0.0
        self.total_tries = 0.0
        self.scale = np.exp(self.log_scale)

    def update(self, it: int, accepted, tried=None) -> None:
        tried = 1.0 if tried is None else tried
        if it <= self.burn_in:
            self.acc += accepted
            self.tries += tried
            if it % self.window == 0:
                self.batch += 1
                step = min(1.0, 3.0 / math.sqrt(self.batch))
                seen = self.tries > 0
                rate = np.divide(self.acc, self.tries, out=np.zeros_like(self.acc), where=seen)
                self.log_scale[seen] += step * (rate[seen] - self.target)
                self.scale = np.exp(self.log_scale)
                self.acc[:] = 0.0
                self.tries[:] = 0.0
        else:
            self.total_acc += float(np.sum(accepted))
            self.total_tries += float(np.sum(tried)) if np.ndim(tried) else tried * len(self.log_scale)

    def rate(self) -> float:
        """Post-burn-in acceptance rate pooled over entries."""
        if self.total_tries == 0:
            return float("nan")
        return self.total_acc / self.total_tries


def update_scalar_params(family, params: dict, extra, adapters: dict, it: int,
                         rng: np.random.Generator, fixed=()) -> None:
    """Sequential random-walk updates of the family's scalar parameters, in place.

    ``extra(name, params)`` returns the likelihood terms that depend on
    ``name``; positive parameters move on the log scale (with Jacobian).
    """
    for name in family.param_names:
        if name in fixed:
            continue
        on_log = name in family.log_params

        def log_target(u, name=name, on_log=on_log):
            if on_log and u > 700.0:
                return -math.inf
            v = math.exp(u) if on_log else u
            lp = family.log_prior(name, v)
            if lp == -math.inf:
                return lp
            trial = dict(params)
            trial[name] = v
            return lp + extra(name, trial) + (u if on_log else 0.0)

        cur = math.log(params[name]) if on_log else params[name]
        adapter = adapters[name]
        new, accepted = adaptive_rw_update(cur, log_target, float(adapter.scale[0]), rng)
        if accepted:
            params[name] = math.exp(new) if on_log else new
        adapter.update(it, float(accepted))
