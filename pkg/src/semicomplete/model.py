"""Data, geometry, state and prior types shared by the likelihoods and samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


class DataError(ValueError):
    """Malformed capture data, geometry or configuration."""


@dataclass(frozen=True)
class FrequencyCounts:
    """``counts[k-1]`` individuals observed exactly ``k`` times, for k = 1..T."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DataError("frequency counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def T(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def __getitem__(self, k: int) -> int:
        """n_k for k >= 1."""
        if not 1 <= k <= self.T:
            raise IndexError(k)
        return self.counts[k - 1]


@dataclass(frozen=True, eq=False)
class CaptureData:
    """Binary detection histories of the observed individuals.

    ``histories`` is n x T for model M_h or n x J x T for SECR.
    """

    histories: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.histories)
        if h.ndim not in (2, 3):
            raise DataError(f"histories must be 2-D or 3-D, got shape {h.shape}")
        if h.size and not np.isin(h, (0, 1)).all():
            raise DataError("histories must contain only 0 and 1")
        h = h.astype(np.int8)
        h.setflags(write=False)
        object.__setattr__(self, "histories", h)

    @property
    def spatial(self) -> bool:
        return self.histories.ndim == 3

    @property
    def n(self) -> int:
        return self.histories.shape[0]

    @property
    def T(self) -> int:
        return self.histories.shape[-1]

    @property
    def J(self) -> int | None:
        return self.histories.shape[1] if self.spatial else None


def derive_counts(data: CaptureData) -> tuple[np.ndarray, FrequencyCounts]:
    """Per-individual capture totals y_i and the frequency counts n_k.

    For SECR histories y_i counts the occasions on which individual i was
    detected at any detector.
    """
    h = data.histories
    if data.spatial:
        h = h.max(axis=1)
    y = h.sum(axis=1).astype(np.int64)
    if (y == 0).any():
        bad = np.flatnonzero(y == 0)
        raise DataError(f"all-zero capture history for individual(s) {bad.tolist()}")
    freqs = np.bincount(y, minlength=data.T + 1)[1:]
    return y, FrequencyCounts(tuple(int(c) for c in freqs))


@dataclass(frozen=True, eq=False)
class SurveyGeometry:
    """Detector coordinates and a regular habitat mask, all in km.

    The region S is the union of the square cells (side sqrt(cell_area))
    centred on the mask points, so its area is ``G * cell_area``.
    """

    detectors: np.ndarray
    mask: np.ndarray
    cell_area: float

    def __post_init__(self):
        det = np.atleast_2d(np.asarray(self.detectors, dtype=float))
        msk = np.atleast_2d(np.asarray(self.mask, dtype=float))
        if det.shape[1] != 2 or msk.shape[1] != 2:
            raise DataError("detector and mask coordinates must be planar (x, y)")
        if len(msk) < 1:
            raise DataError("habitat mask is empty")
        if not (np.isfinite(det).all() and np.isfinite(msk).all()):
            raise DataError("coordinates must be finite")
        if not self.cell_area > 0:
            raise DataError("cell_area must be positive")
        det.setflags(write=False)
        msk.setflags(write=False)
        object.__setattr__(self, "detectors", det)
        object.__setattr__(self, "mask", msk)
        object.__setattr__(self, "cell_area", float(self.cell_area))
        origin = msk.min(axis=0)
        idx = np.rint((msk - origin) / self.spacing).astype(np.int64)
        if not np.allclose(origin + idx * self.spacing, msk, atol=1e-6 * self.spacing):
            raise DataError("mask points must lie on a regular lattice with spacing sqrt(cell_area)")
        object.__setattr__(self, "_origin", origin)
        object.__setattr__(self, "_cells", frozenset(map(tuple, idx.tolist())))
        extent = idx.max(axis=0) + 1
        half = 0.5 * self.spacing
        object.__setattr__(self, "_bounds", (msk.min(axis=0) - half, msk.max(axis=0) + half))
        object.__setattr__(self, "_rect", len(self._cells) == int(extent[0] * extent[1]) == self.G)

    @property
    def J(self) -> int:
        return len(self.detectors)

    @property
    def G(self) -> int:
        return len(self.mask)

    @property
    def spacing(self) -> float:
        return float(np.sqrt(self.cell_area))

    @property
    def area(self) -> float:
        return self.G * self.cell_area

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounding box of S (mask extent padded by half a cell)."""
        return self._bounds

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership of each point in S."""
        pts = np.atleast_2d(points)
        lo, hi = self.bounds
        inside = ((pts >= lo) & (pts <= hi)).all(axis=1)
        if self._rect:
            return inside
        idx = np.rint((pts - self._origin) / self.spacing).astype(np.int64)
        return inside & np.array([tuple(c) in self._cells for c in idx.tolist()], dtype=bool)

    def sample_points(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Points uniform on S: a random cell, then uniform within it."""
        cells = rng.integers(0, self.G, size=size)
        jitter = rng.uniform(-0.5, 0.5, size=(size, 2)) * self.spacing
        return self.mask[cells] + jitter


def rectangular_mask(x_range: tuple[float, float], y_range: tuple[float, float],
                     nx: int, ny: int) -> tuple[np.ndarray, float]:
    """Cell-centred grid of nx*ny points filling the rectangle; returns (mask, cell_area).

    The x and y spacings must agree (square cells).
    """
    hx = (x_range[1] - x_range[0]) / nx
    hy = (y_range[1] - y_range[0]) / ny
    if not np.isclose(hx, hy, rtol=1e-9):
        raise DataError(f"non-square mask cells ({hx} x {hy})")
    xs = x_range[0] + (np.arange(nx) + 0.5) * hx
    ys = y_range[0] + (np.arange(ny) + 0.5) * hy
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()]), hx * hx


# -- parameter states -------------------------------------------------------

@dataclass
class MhState:
    alpha: float
    sigma2: float
    eps: np.ndarray
    N: int

    def copy(self) -> MhState:
        return MhState(self.alpha, self.sigma2, np.array(self.eps, dtype=float), self.N)


@dataclass
class SecrState:
    sigma: float
    centres: np.ndarray
    N: int

    def copy(self) -> SecrState:
        return SecrState(self.sigma, np.array(self.centres, dtype=float), self.N)


@dataclass
class SuperPopState:
    """Super-population augmentation: M slots, membership indicators z.

    ``params`` holds the scalar detection / heterogeneity parameters
    (``alpha``, ``sigma2`` for M_h; ``sigma`` for SECR).
    """

    M: int
    z: np.ndarray
    eps_full: np.ndarray
    params: dict[str, float]
    psi: float | None = None

    @property
    def N(self) -> int:
        return int(np.count_nonzero(self.z))


# -- priors -----------------------------------------------------------------

@dataclass(frozen=True)
class TruncJeffreys:
    M: int

    def check(self):
        if self.M < 1:
            raise DataError("TruncJeffreys upper bound M must be >= 1")


@dataclass(frozen=True)
class Power:
    """p(N) proportional to N^-c on 1..M."""

    c: float
    M: int

    def check(self):
        if not self.c > 0 or self.M < 1:
            raise DataError("Power prior needs c > 0 and M >= 1")


@dataclass(frozen=True)
class Poisson:
    lam: float

    def check(self):
        if not self.lam > 0:
            raise DataError("Poisson prior needs lam > 0")


@dataclass(frozen=True)
class NegBinomial:
    """f(N) = (N+r-1)! / (N! (r-1)!) p^r (1-p)^N."""

    r: float
    p: float

    def check(self):
        if not self.r > 0 or not 0 < self.p <= 1:
            raise DataError("NegBinomial prior needs r > 0 and 0 < p <= 1")


NPrior = Union[TruncJeffreys, Power, Poisson, NegBinomial]


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    var: float = 100.0


@dataclass(frozen=True)
class InverseGamma:
    shape: float = 0.01
    scale: float = 0.01


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 10.0


@dataclass(frozen=True)
class Beta:
    a: float = 0.001
    b: float = 1.0


@dataclass(frozen=True)
class PriorSpec:
    n_prior: NPrior = field(default_factory=lambda: TruncJeffreys(1000))
    alpha_prior: Normal = Normal()
    sigma2_prior: InverseGamma = InverseGamma()
    sigma_prior: Uniform = Uniform()
    psi_prior: Beta = Beta()

    def __post_init__(self):
        self.n_prior.check()
        if not self.alpha_prior.var > 0:
            raise DataError("alpha prior variance must be positive")
        if not (self.sigma2_prior.shape > 0 and self.sigma2_prior.scale > 0):
            raise DataError("sigma2 prior hyperparameters must be positive")
        if not self.sigma_prior.high > self.sigma_prior.low >= 0:
            raise DataError("sigma prior must be an interval within [0, inf)")
        if not (self.psi_prior.a > 0 and self.psi_prior.b > 0):
            raise DataError("psi prior hyperparameters must be positive")

    @property
    def upper_bound(self) -> int | None:
        return getattr(self.n_prior, "M", None)


def validate_state(state, data: CaptureData, priors: PriorSpec | None = None,
                   geometry: SurveyGeometry | None = None) -> list[str]:
    """Every violated invariant of ``state``; an empty list means valid."""
    out: list[str] = []
    n = data.n
    if isinstance(state, MhState):
        if not np.isfinite(state.alpha):
            out.append("alpha not finite")
        if not state.sigma2 > 0:
            out.append("sigma2 <= 0")
        if len(state.eps) != n:
            out.append(f"eps length {len(state.eps)} != n = {n}")
        elif not np.isfinite(state.eps).all():
            out.append("eps not finite")
    elif isinstance(state, SecrState):
        if not state.sigma > 0:
            out.append("sigma <= 0")
        centres = np.atleast_2d(state.centres)
        if centres.shape != (n, 2):
            out.append(f"centres shape {centres.shape} != ({n}, 2)")
        elif geometry is not None:
            lo, hi = geometry.bounds
            pad = 0.5 * geometry.spacing
            if not ((centres >= lo - pad) & (centres <= hi + pad)).all():
                out.append("centre outside the expanded mask bounding box")
    elif isinstance(state, SuperPopState):
        z = np.asarray(state.z)
        if state.M < n:
            out.append("M < n")
        if len(z) != state.M:
            out.append(f"z length {len(z)} != M = {state.M}")
        if not np.isin(z, (0, 1)).all():
            out.append("z not binary")
        if (z[:n] != 1).any():
            out.append("z_i = 0 for an observed individual")
        if state.psi is not None and not 0 < state.psi < 1:
            out.append("psi outside (0, 1)")
        return out
    else:
        out.append(f"unknown state type {type(state).__name__}")
        return out
    if state.N < n:
        out.append("N < n")
    if priors is not None and priors.upper_bound is not None and state.N > priors.upper_bound:
        out.append("N > M")
    return out


def is_prefix_ones(z: np.ndarray) -> bool:
    """True when all ones precede all zeros (CD:DE ordering)."""
    z = np.asarray(z)
    k = int(np.count_nonzero(z))
    return bool((z[:k] == 1).all() and (z[k:] == 0).all())
