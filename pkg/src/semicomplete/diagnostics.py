"""Convergence diagnostics and posterior summaries."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


class DegenerateChainWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    sd: float
    ci_low: float
    ci_high: float
    ess: float
    ess_per_second: float
    psrf: float

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Sample autocorrelation at all lags via FFT (biased, divisor L)."""
    x = np.asarray(x, dtype=float)
    L = len(x)
    xc = x - x.mean()
    nfft = 1 << (2 * L - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:L] / L
    return acov / acov[0]


def ess(samples, return_flag: bool = False):
    """Effective sample size with Geyer's initial monotone positive sequence.

    A constant chain has ESS 0 and raises ``DegenerateChainWarning`` (or returns
    ``(0.0, True)`` when ``return_flag``).
    """
    x = np.asarray(samples, dtype=float)
    L = len(x)
    if L < 10:
        raise ValueError("ESS needs at least 10 samples")
    if np.ptp(x) == 0 or not np.var(x) > 0:  # var can underflow for tiny spreads
        if return_flag:
            return 0.0, True
        warnings.warn("constant chain: ESS set to 0", DegenerateChainWarning, stacklevel=2)
        return 0.0
    rho = autocorrelation(x)
    # pair sums Gamma_k = rho_2k + rho_2k+1
    m = (L - 1) // 2
    gam = rho[0 : 2 * m : 2] + rho[1 : 2 * m + 1 : 2]
    positive = gam > 0
    k = len(gam) if positive.all() else int(np.argmin(positive))
    gam = np.minimum.accumulate(gam[:k])
    tau = -1.0 + 2.0 * gam.sum()
    tau = max(tau, 0.5)  # caps ESS at 2L
    out = L / tau
    return (out, False) if return_flag else out


def psrf(chains) -> float:
    """Potential scale reduction factor sqrt(V / W).

    V = (L-1)/L W + (m+1)/m B/L, with B/L the variance of the chain means and
    W the mean within-chain variance.
    """
    arrs = [np.asarray(c, dtype=float) for c in chains]
    m = len(arrs)
    if m < 2:
        raise ValueError("PSRF needs at least two chains")
    L = len(arrs[0])
    if L < 10 or any(len(a) != L for a in arrs):
        raise ValueError("chains must have equal length >= 10")
    x = np.vstack(arrs)
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B_over_L = means.var(ddof=1)
    if W == 0:
        return 1.0 if B_over_L == 0 else math.inf
    V = (L - 1) / L * W + (m + 1) / m * B_over_L
    return float(math.sqrt(V / W))


def summarize(traces, wall_seconds: float | None = None) -> Summary:
    """Pooled summary of one quantity.

    ``traces`` is a single sample vector or a list of per-chain vectors.
    Quantiles interpolate linearly between order statistics; ESS is summed
    over chains.
    """
    if isinstance(traces, np.ndarray) and traces.ndim == 1:
        chains = [traces]
    else:
        chains = [np.asarray(c, dtype=float) for c in traces]
    if not chains or any(len(c) == 0 for c in chains):
        raise ValueError("summarize needs non-empty traces")
    pooled = np.concatenate(chains).astype(float)
    lo, med, hi = np.quantile(pooled, [0.025, 0.5, 0.975])
    total_ess = sum(ess(c, return_flag=True)[0] for c in chains if len(c) >= 10)
    can_psrf = len(chains) >= 2 and len({len(c) for c in chains}) == 1 and len(chains[0]) >= 10
    return Summary(
        mean=float(pooled.mean()),
        median=float(med),
        sd=float(pooled.std(ddof=1)) if len(pooled) > 1 else 0.0,
        ci_low=float(lo),
        ci_high=float(hi),
        ess=float(total_ess),
        ess_per_second=float(total_ess / wall_seconds) if wall_seconds else math.nan,
        psrf=psrf(chains) if can_psrf else math.nan,
    )


def mcse(chains) -> float:
    """Monte-Carlo standard error of the pooled mean, sd / sqrt(total ESS)."""
    chains = [np.asarray(c, dtype=float) for c in chains]
    pooled = np.concatenate(chains)
    total = sum(ess(c, return_flag=True)[0] for c in chains)
    return float(pooled.std(ddof=1) / math.sqrt(total)) if total > 0 else math.inf
