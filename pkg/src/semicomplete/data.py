"""Bundled data and simulators.

The snowshoe hare capture frequencies (T = 6 occasions) and a gibbon-style
acoustic survey layout: 13 linear arrays of 3 listening posts 0.5 km apart
inside a 546 km^2 region represented by a 60 x 70 mask (cell area 0.13 km^2).
The gibbon detections themselves are not public, so SECR data are simulated.
"""

from __future__ import annotations

import math

import numpy as np

from .model import CaptureData, DataError, FrequencyCounts, SurveyGeometry, rectangular_mask

HARE_FREQUENCIES = FrequencyCounts((25, 22, 13, 5, 1, 2))
HARE_T = 6

GIBBON_CELL_AREA = 0.13
GIBBON_MASK_SHAPE = (60, 70)
GIBBON_POST_SPACING = 0.5
# array centres (km): five staggered rows across the region
GIBBON_ARRAY_CENTRES = (
    (4.0, 4.0), (10.8, 4.0), (17.6, 4.0),
    (7.4, 8.5), (14.2, 8.5),
    (4.0, 13.0), (10.8, 13.0), (17.6, 13.0),
    (7.4, 17.5), (14.2, 17.5),
    (4.0, 22.0), (10.8, 22.0), (17.6, 22.0),
)
# (sigma, N) giving about 77 detected groups on average at T = 1
GIBBON_SIGMA_TRUE = 0.87
GIBBON_N_TRUE = 350


def expand_frequencies(freqs: FrequencyCounts | tuple[int, ...], T: int) -> CaptureData:
    """Histories with the given capture frequencies: n_k rows with ones in columns 1..k.

    Under M_h the likelihood depends on a history only through its row sum,
    so this canonical expansion is likelihood-equivalent to the raw data.
    """
    counts = freqs.counts if isinstance(freqs, FrequencyCounts) else tuple(int(c) for c in freqs)
    if any(c < 0 for c in counts):
        raise DataError("frequencies must be non-negative")
    if any(c > 0 for k, c in enumerate(counts, 1) if k > T):
        raise DataError(f"frequency for k > T = {T} captures")
    rows = [[1] * k + [0] * (T - k) for k, c in enumerate(counts, 1) for _ in range(c)]
    return CaptureData(np.array(rows, dtype=np.int8).reshape(len(rows), T))


def hare_data() -> CaptureData:
    return expand_frequencies(HARE_FREQUENCIES, HARE_T)


def gibbon_geometry() -> SurveyGeometry:
    side = math.sqrt(GIBBON_CELL_AREA)
    nx, ny = GIBBON_MASK_SHAPE
    mask, cell_area = rectangular_mask((0.0, nx * side), (0.0, ny * side), nx, ny)
    offsets = np.array([-GIBBON_POST_SPACING, 0.0, GIBBON_POST_SPACING])
    detectors = np.array([(x + dx, y) for x, y in GIBBON_ARRAY_CENTRES for dx in offsets])
    return SurveyGeometry(detectors, mask, cell_area)


def simulate_secr(geometry: SurveyGeometry, sigma_true: float, N_true: int, T: int,
                  seed: int) -> CaptureData:
    """Half-normal detections of N_true centres uniform on the mask region.

    Groups never detected are dropped; the result holds the n x J x T
    histories of the detected ones.
    """
    if N_true < 0 or T < 1 or sigma_true < 0:
        raise DataError("need N_true >= 0, T >= 1 and sigma_true >= 0")
    rng = np.random.default_rng(seed)
    centres = geometry.sample_points(N_true, rng)
    d2 = ((centres[:, None, :] - geometry.detectors[None]) ** 2).sum(-1)
    if sigma_true > 0:
        p = np.exp(-d2 / (2.0 * sigma_true**2))
    else:
        p = (d2 == 0).astype(float)
    x = (rng.random((N_true, geometry.J, T)) < p[:, :, None]).astype(np.int8)
    seen = x.reshape(N_true, -1).any(axis=1)
    return CaptureData(x[seen].reshape(int(seen.sum()), geometry.J, T))


def simulate_mh(N_true: int, T: int, alpha: float, sigma: float, seed: int) -> CaptureData:
    """Histories under logit p_i = alpha + eps_i, eps_i ~ N(0, sigma^2); unseen rows dropped."""
    if N_true < 0 or T < 1 or sigma < 0:
        raise DataError("need N_true >= 0, T >= 1 and sigma >= 0")
    rng = np.random.default_rng(seed)
    eta = alpha + sigma * rng.standard_normal(N_true)
    p = 1.0 / (1.0 + np.exp(-eta))
    x = (rng.random((N_true, T)) < p[:, None]).astype(np.int8)
    seen = x.any(axis=1)
    return CaptureData(x[seen].reshape(int(seen.sum()), T))
