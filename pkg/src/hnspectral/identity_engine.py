"""Linear identity system linking omega_1..omega_{m+1} and sigma_0..sigma_m, m = ind f.

Row k (k = 0..m) reads

    (-1)**k * omega_{1-k} + sum_{i=-floor(k/2)}^{floor((m+1-k)/2)} sigma_{m-i-k} * omega_{2i+k} = 0

with omega_0 = 1 and omega_j = 0 for j < 0.  The system is linear in either
set of unknowns.  All index bookkeeping lives in :func:`identity_terms`.

Also here: the Parseval-type sums for 1/delta_k and 1/h0, and the
right-endpoint transform gamma_n -> beta_n**2 gamma_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .direct_solver import SpectralDatum, Spectrum
from .errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite, SingularSystem
from .hn_functions import OmegaVector, RationalHNFunction, RealPolynomial, index, up_down
from .spectral_sums import SigmaVector, asymptotic_tail

__all__ = [
    "IdentitySystem",
    "identity_terms",
    "omega_coefficient_matrix",
    "sigma_system",
    "residuals",
    "solve_for_omega",
    "solve_for_sigma",
    "system_determinant",
    "parity_stages",
    "ParsevalResult",
    "parseval_delta",
    "parseval_h0",
    "right_endpoint_spectrum",
]


@lru_cache(maxsize=None)
def identity_terms(m: int) -> tuple:
    """Per row k: ``(sign, omega_index_or_None, ((sigma_index, omega_index), ...))``."""
    if m < 0:
        raise ValueError("ind f must be nonnegative")
    rows = []
    for k in range(m + 1):
        extra = 1 - k if 1 - k >= 0 else None
        pairs = []
        for i in range(-(k // 2), (m + 1 - k) // 2 + 1):
            s, j = m - i - k, 2 * i + k
            assert 0 <= s <= m and 0 <= j <= m + 1
            pairs.append((s, j))
        rows.append(((-1) ** k, extra, tuple(pairs)))
    return tuple(rows)


@dataclass(frozen=True)
class IdentitySystem:
    """``matrix @ x = rhs``; x is sigma_0..sigma_m or omega_0..omega_{m+1}."""

    ind_f: int
    matrix: np.ndarray
    rhs: np.ndarray
    direction: str


def omega_coefficient_matrix(sigmas: SigmaVector) -> np.ndarray:
    """C with row k of the identities equal to ``C[k] @ [omega_0, ..., omega_{m+1}]``."""
    m = sigmas.ind_f
    s = sigmas.sigmas
    C = np.zeros((m + 1, m + 2))
    for k, (sign, extra, pairs) in enumerate(identity_terms(m)):
        if extra is not None:
            C[k, extra] += sign
        for si, oj in pairs:
            C[k, oj] += s[si]
    return C


def sigma_system(omegas: OmegaVector) -> IdentitySystem:
    m = omegas.ind_f
    w = omegas.full()
    A = np.zeros((m + 1, m + 1))
    rhs = np.zeros(m + 1)
    for k, (sign, extra, pairs) in enumerate(identity_terms(m)):
        if extra is not None:
            rhs[k] -= sign * w[extra]
        for si, oj in pairs:
            A[k, si] += w[oj]
    return IdentitySystem(m, A, rhs, "for_sigma")


def residuals(omegas: OmegaVector, sigmas: SigmaVector) -> np.ndarray:
    if omegas.ind_f != sigmas.ind_f:
        raise DimensionMismatch(f"ind f mismatch: omegas {omegas.ind_f}, sigmas {sigmas.ind_f}")
    return omega_coefficient_matrix(sigmas) @ omegas.full()


def parity_stages(m: int) -> list[tuple[list[int], list[int]]]:
    """(rows, omega columns) solved in order; each block is a Hankel matrix or a scalar."""
    if m % 2 == 1:
        odd = list(range(1, m + 1, 2))
        even = list(range(0, m + 1, 2))
        return [(odd, odd), (even, [j + 2 for j in even])]
    d = m // 2
    stages = []
    if d:
        stages.append((list(range(2, m + 1, 2)), list(range(2, m + 1, 2))))
    stages.append(([0], [1]))
    if d:
        stages.append((list(range(1, m, 2)), list(range(3, m + 2, 2))))
    return stages


def solve_for_omega(sigmas: SigmaVector, check_residual: float | None = 1e-6) -> OmegaVector:
    """Recover omega_1..omega_{m+1} by the parity-split Hankel solves."""
    m = sigmas.ind_f
    C = omega_coefficient_matrix(sigmas)
    w = np.full(m + 2, np.nan)
    w[0] = 1.0
    for rows, cols in parity_stages(m):
        known = [j for j in range(m + 2) if not np.isnan(w[j])]
        H = C[np.ix_(rows, cols)]
        rhs = -C[np.ix_(rows, known)] @ w[known]
        other = [j for j in range(m + 2) if j not in known and j not in cols]
        assert not other or not np.any(C[np.ix_(rows, other)])
        assert np.allclose(H, H.T, rtol=1e-12, atol=0.0)
        try:
            factor = scipy.linalg.cho_factor(H, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NotPositiveDefinite(
                f"Hankel block for rows {rows} is not positive definite; sigma data is inconsistent or truncated"
            ) from exc
        w[cols] = scipy.linalg.cho_solve(factor, rhs)
    result = OmegaVector(m, tuple(w[1:]))
    if check_residual is not None:
        res = residuals(result, sigmas)
        scale = 1.0 + np.max(np.abs(C)) * np.max(np.abs(w))
        if np.max(np.abs(res)) > check_residual * scale:
            raise NotPositiveDefinite(f"parity solve left residual {np.max(np.abs(res)):g}")
    return result


def solve_for_sigma(omegas: OmegaVector, cond_limit: float = 1e13) -> SigmaVector:
    system = sigma_system(omegas)
    cond = np.linalg.cond(system.matrix)
    if not np.isfinite(cond) or cond > cond_limit:
        raise SingularSystem(f"sigma system is singular (condition number {cond:g})")
    sig = np.linalg.solve(system.matrix, system.rhs)
    return SigmaVector(omegas.ind_f, tuple(sig))


def system_determinant(omegas: OmegaVector) -> float:
    return float(np.linalg.det(sigma_system(omegas).matrix))


# --- Parseval-type sums --------------------------------------------------------


class ParsevalResult(NamedTuple):
    estimate: float
    partial_sums: np.ndarray
    tail_estimate: float
    divergent: bool


def _decay_exponent(indices: np.ndarray, terms: np.ndarray, L: float) -> float:
    """Power p in terms ~ (n - L)**-p fitted on the last quarter (log-log)."""
    mask = ((indices - L) > 0.5) & (terms > 0)
    n, t = indices[mask], terms[mask]
    k = max(5, len(n) // 4)
    n, t = n[-k:], t[-k:]
    if n.size < 3:
        return math.inf
    slope = np.polyfit(np.log(n - L), np.log(t), 1)[0]
    return float(-slope)


def _parseval(spectrum: Spectrum, poly: RealPolynomial, m: int, tail: bool) -> ParsevalResult:
    lam, gam, n = spectrum.lambdas, spectrum.gammas, spectrum.indices
    terms = poly(lam) ** 2 / gam
    partial = np.cumsum(terms)
    total = float(partial[-1]) if partial.size else 0.0
    # terms ~ (2/pi) lead**2 (n - L)**(-2p), p = m - 2 deg
    p = m - 2 * max(poly.degree, 0)
    if p <= 0 or _decay_exponent(n.astype(float), terms, spectrum.L) < 1.0:
        return ParsevalResult(math.inf, partial, math.inf, True)
    est = asymptotic_tail(n, terms, spectrum.L, 2 * p, lead=(2.0 / math.pi) * poly.lead**2) if tail else 0.0
    return ParsevalResult(total + est, partial, abs(est), False)


def parseval_delta(spectrum: Spectrum, f: RationalHNFunction, k: int, tail: bool = True) -> ParsevalResult:
    """Estimate 1/delta_k from sum_n (f_down(lam_n) / (lam_n - h_k))**2 / gamma_n, k = 1..d."""
    if not 1 <= k <= f.d:
        raise IndexOutOfRange(f"pole index must be in 1..{f.d}, got {k}")
    scale = 1.0 / f.h0 if f.h0 > 0 else 1.0
    # f_down / (lam - h_k) == -h0' prod_{j != k} (h_j - lam), built without division.
    quotient = RealPolynomial((-scale,))
    for j, (hj, _) in enumerate(f.poles, start=1):
        if j != k:
            quotient = quotient * RealPolynomial((hj, -1.0))
    return _parseval(spectrum, quotient, index(f), tail)


def parseval_h0(spectrum: Spectrum, f: RationalHNFunction, tail: bool = True) -> ParsevalResult:
    """Estimate 1/h0 from sum_n f_down(lam_n)**2 / gamma_n; divergent when h0 == 0."""
    _, down = up_down(f)
    return _parseval(spectrum, down, index(f), tail)


def right_endpoint_spectrum(spectrum: Spectrum) -> Spectrum:
    """Spectral data seen from x = pi: gamma_n -> beta_n**2 gamma_n, roles of f and F swapped."""
    data = []
    for d in spectrum.data:
        if d.beta_n is None or not np.isfinite(d.beta_n):
            raise ValueError(f"beta missing for n={d.n}; cannot transform to the right endpoint")
        data.append(SpectralDatum(d.n, d.lambda_n, d.beta_n**2 * d.gamma_n, 1.0 / d.beta_n, d.chi_prime))
    return replace(spectrum, data=tuple(data), ind_f=spectrum.ind_F, ind_F=spectrum.ind_f)
