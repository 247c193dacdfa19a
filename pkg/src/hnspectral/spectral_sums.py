"""Spectral sums sigma_k = sum_n lam_n**k / gamma_n for k = 0..ind_f.

The top sum (k = ind_f) does not converge on its own; each term past index L
is regularized by subtracting 2/pi (1/pi for the term with n == L).  Finite
spectra are completed by an asymptotic tail: lam_n**k / gamma_n behaves like
(2/pi) (n - L)**(2(k - ind_f)) plus a next-order term fitted on the last
computed quarter of the spectrum.  Tails are summed with the Hurwitz zeta
function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .direct_solver import Spectrum
from .errors import IndexOutOfRange

__all__ = [
    "SigmaVector",
    "sigma_plain",
    "sigma_top",
    "sigma_vector",
    "regularization_offsets",
    "asymptotic_tail",
]

TWO_OVER_PI = 2.0 / math.pi


@dataclass(frozen=True)
class SigmaVector:
    ind_f: int
    sigmas: tuple
    n_used: int = 0
    tail_estimates: tuple = ()

    def __post_init__(self):
        s = tuple(float(x) for x in self.sigmas)
        object.__setattr__(self, "sigmas", s)
        if len(s) != self.ind_f + 1:
            raise ValueError(f"expected {self.ind_f + 1} sigmas, got {len(s)}")
        if not self.tail_estimates:
            object.__setattr__(self, "tail_estimates", (0.0,) * len(s))
        else:
            object.__setattr__(self, "tail_estimates", tuple(float(x) for x in self.tail_estimates))

    def as_array(self) -> np.ndarray:
        return np.array(self.sigmas)

    def to_dict(self) -> dict:
        return {
            "ind_f": self.ind_f,
            "sigmas": list(self.sigmas),
            "truncation": {"n_used": self.n_used, "tail_estimates": list(self.tail_estimates)},
        }


def regularization_offsets(indices: np.ndarray, L: float) -> np.ndarray:
    """Amount subtracted from each top-sum term: 0 below L, 1/pi at L, 2/pi above."""
    n = np.asarray(indices, dtype=float)
    out = np.where(n > L, TWO_OVER_PI, 0.0)
    return np.where(n == L, 1.0 / math.pi, out)


def _fit_next_order(n: np.ndarray, resid: np.ndarray, L: float, power: float) -> float:
    """Least-squares c in resid ~ c (n - L)**(-power) over the last quarter."""
    mask = (n - L) > 0.5
    n, resid = n[mask], resid[mask]
    k = max(5, len(n) // 4)
    n, resid = n[-k:], resid[-k:]
    if n.size < 3:
        return 0.0
    x = (n - L) ** (-power)
    return float(np.dot(x, resid) / np.dot(x, x))


def _tail_sum(power: float, start: float) -> float:
    """sum_{n >= start_index} (n - L)**(-power) where start = first n - L."""
    if start <= 0:
        return math.nan
    return float(zeta(power, start))


def asymptotic_tail(indices, terms, L: float, power: int, lead: float = TWO_OVER_PI) -> float:
    """Sum over n past the last index of ``lead (n-L)**-power + c (n-L)**-(power+2)``.

    ``c`` is fitted to ``terms`` (which must already be regularized when
    ``power == 0``; the leading part is then absent).
    """
    n = np.asarray(indices, dtype=float)
    terms = np.asarray(terms, dtype=float)
    if n.size == 0:
        return 0.0
    start = n[-1] + 1 - L
    if power == 0:
        c = _fit_next_order(n, terms, L, 2.0)
        est = c * _tail_sum(2.0, start)
    else:
        with np.errstate(divide="ignore"):
            model = lead * np.abs(n - L) ** (-float(power))
        c = _fit_next_order(n, terms - model, L, power + 2.0)
        est = lead * _tail_sum(power, start) + c * _tail_sum(power + 2.0, start)
    return est if math.isfinite(est) else 0.0


def _partial_and_tail(spectrum: Spectrum, k: int, m: int, tail: bool) -> tuple[float, float]:
    lam, gam, n = spectrum.lambdas, spectrum.gammas, spectrum.indices
    terms = lam**k / gam
    if k == m:
        terms = terms - regularization_offsets(n, spectrum.L)
    partial = float(np.sum(terms))
    if not tail:
        return partial, 0.0
    est = asymptotic_tail(n, terms, spectrum.L, 2 * (m - k))
    return partial + est, abs(est)


def sigma_plain(spectrum: Spectrum, k: int, tail: bool = True, ind_f: int | None = None) -> tuple[float, float]:
    """sigma_k for 0 <= k < ind_f; returns ``(value, tail_estimate)``."""
    m = spectrum.ind_f if ind_f is None else ind_f
    if not 0 <= k < m:
        raise IndexOutOfRange(f"plain sums exist for 0 <= k < {m}, got k={k}")
    return _partial_and_tail(spectrum, k, m, tail)


def sigma_top(spectrum: Spectrum, tail: bool = True, ind_f: int | None = None) -> tuple[float, float]:
    """Regularized sigma_{ind_f}; returns ``(value, tail_estimate)``."""
    m = spectrum.ind_f if ind_f is None else ind_f
    return _partial_and_tail(spectrum, m, m, tail)


def sigma_vector(spectrum: Spectrum, tail: bool = True, ind_f: int | None = None) -> SigmaVector:
    m = spectrum.ind_f if ind_f is None else ind_f
    entries = [sigma_plain(spectrum, k, tail, m) for k in range(m)]
    entries.append(sigma_top(spectrum, tail, m))
    return SigmaVector(
        m,
        tuple(v for v, _ in entries),
        n_used=len(spectrum),
        tail_estimates=tuple(t for _, t in entries),
    )
