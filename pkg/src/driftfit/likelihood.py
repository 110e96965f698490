"""Whittle-type objective functions over a masked frequency set.

Both objectives score a model against the periodogram ordinate-by-ordinate
and are to be *maximized*.  The plain version compares against the true
spectral density; the blurred version compares against the finite-sample
expected periodogram, which removes the leakage and aliasing bias that the
plain version inherits from the periodogram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, model_spectrum
from .spectral import FrequencyMask, Periodogram, expected_periodogram

__all__ = ["Objective", "whittle_loglik", "blurred_whittle_loglik"]


def _score(data_vals: np.ndarray, model_vals: np.ndarray) -> float:
    if np.any(model_vals <= 0.0) or not np.all(np.isfinite(model_vals)):
        raise ValueError("model spectrum is not positive at a masked frequency")
    return float(-np.sum(data_vals / model_vals + np.log(model_vals)))


def whittle_loglik(
    pg: Periodogram,
    p: ModelParams,
    mask: FrequencyMask | None = None,
    f0: float | None = None,
) -> float:
    """Plain Whittle log-likelihood: model side is the true spectrum.

    Returns ``-sum(I(w)/S(w) + log S(w))`` over the masked frequencies;
    larger is better.
    """
    idx = _resolve(pg, mask, f0)
    return _score(pg.values[idx], np.asarray(model_spectrum(p, pg.freqs[idx])))


def blurred_whittle_loglik(
    pg: Periodogram,
    p: ModelParams,
    mask: FrequencyMask | None = None,
    n: int | None = None,
    dt: float | None = None,
    f0: float | None = None,
) -> float:
    """Blurred Whittle log-likelihood: model side is the expected periodogram.

    ``n`` and ``dt`` default to the periodogram's own; they must describe the
    record the periodogram came from, since the blurring depends on both.
    """
    idx = _resolve(pg, mask, f0)
    expected = expected_periodogram(p, n or pg.n, dt or pg.dt)
    return _score(pg.values[idx], expected.values[idx])


def _resolve(pg: Periodogram, mask: FrequencyMask | None, f0: float | None) -> np.ndarray:
    if mask is None:
        return np.arange(pg.freqs.size)
    return mask.resolve(pg.freqs, f0=f0)


@dataclass(frozen=True)
class Objective:
    """A scoring rule bound to data: call it with model parameters.

    Bundles the likelihood kind, the data periodogram, and the frequency
    mask; blurred scoring draws the record length and interval from the
    periodogram itself.
    """

    kind: str
    data: Periodogram
    mask: FrequencyMask | None = None
    f0: float | None = None

    def __post_init__(self):
        if self.kind not in ("whittle", "blurred"):
            raise ValueError(f"unknown likelihood kind {self.kind!r}")
        _resolve(self.data, self.mask, self.f0)  # nonempty masked set

    def __call__(self, p: ModelParams) -> float:
        if self.kind == "blurred":
            return blurred_whittle_loglik(self.data, p, self.mask, f0=self.f0)
        return whittle_loglik(self.data, p, self.mask, f0=self.f0)
