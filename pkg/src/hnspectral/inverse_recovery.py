"""Inverse procedures built on the identity system.

* :func:`recover_boundary_coefficient` -- spectral data -> sigma -> omega -> f.
* :func:`recover_missing` -- f and F known, a few eigenvalues and/or norming
  constants unknown: solve the left (and, when beta's are available, the
  right-endpoint) identities for them by damped Gauss-Newton.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .direct_solver import SpectralDatum, Spectrum
from .errors import NoConvergence, NotHerglotz, UnderdeterminedProblem
from .hn_functions import OmegaVector, RationalHNFunction, index, omega_poly, omega_to_hn
from .identity_engine import residuals, sigma_system, solve_for_omega
from .spectral_sums import TWO_OVER_PI, asymptotic_tail, regularization_offsets, sigma_vector

logger = logging.getLogger(__name__)

__all__ = [
    "MissingSlot",
    "PartialSpectrum",
    "recover_boundary_coefficient",
    "recover_missing",
]


def _check_asymptotics(spectrum: Spectrum, ind_f: int, rel_tol: float = 0.25) -> None:
    # lam_n**ind_f / gamma_n must tend to 2/pi, otherwise the regularization is meaningless.
    lam, gam = spectrum.lambdas, spectrum.gammas
    k = max(3, len(lam) // 10)
    lam, gam = lam[-k:], gam[-k:]
    if np.any(lam <= 0):
        return
    ratio = lam**ind_f / gam / TWO_OVER_PI
    if np.any(np.abs(ratio - 1.0) > rel_tol):
        raise NotHerglotz(
            f"lam_n^{ind_f}/gamma_n does not approach 2/pi (last ratios {ratio[-3:]}); "
            "the supplied ind_f does not match this spectrum"
        )


def recover_boundary_coefficient(spectrum: Spectrum, ind_f: int, tail: bool = True, full_output: bool = False):
    """Recover f from eigenvalues and norming constants, given its index.

    With ``full_output`` returns ``(f, info)`` where ``info`` holds the sigma
    and omega vectors and the identity residuals of the recovered f.
    """
    if ind_f < 0:
        raise ValueError("ind_f must be nonnegative")
    if len(spectrum) >= 8:
        _check_asymptotics(spectrum, ind_f)
    sig = sigma_vector(spectrum, tail=tail, ind_f=ind_f)
    om = solve_for_omega(sig)
    f = omega_to_hn(om)
    if not full_output:
        return f
    res = residuals(omega_poly(f), sig)
    return f, {"sigmas": sig, "omegas": om, "residuals": res}


@dataclass(frozen=True)
class MissingSlot:
    """An index whose eigenvalue and/or norming constant is unknown.

    For the missing quantity the corresponding field is an optional initial
    guess; for the other one it is the known value.  ``beta_n`` is optional.
    """

    n: int
    which: str = "both"
    lambda_n: Optional[float] = None
    gamma_n: Optional[float] = None
    beta_n: Optional[float] = None

    def __post_init__(self):
        if self.which not in ("lambda", "gamma", "both"):
            raise ValueError(f"which must be 'lambda', 'gamma' or 'both', got {self.which!r}")
        if self.which == "lambda" and self.gamma_n is None:
            raise ValueError(f"slot n={self.n}: gamma must be given when only lambda is missing")
        if self.which == "gamma" and self.lambda_n is None:
            raise ValueError(f"slot n={self.n}: lambda must be given when only gamma is missing")

    @property
    def lambda_missing(self) -> bool:
        return self.which in ("lambda", "both")

    @property
    def gamma_missing(self) -> bool:
        return self.which in ("gamma", "both")

    @property
    def unknown_count(self) -> int:
        return int(self.lambda_missing) + int(self.gamma_missing)

    def to_dict(self) -> dict:
        return {"n": self.n, "which": self.which, "lambda": self.lambda_n, "gamma": self.gamma_n, "beta": self.beta_n}

    @classmethod
    def from_dict(cls, data: dict) -> "MissingSlot":
        def opt(key):
            v = data.get(key)
            return None if v is None else float(v)

        return cls(int(data["n"]), data.get("which", "both"), opt("lambda"), opt("gamma"), opt("beta"))


@dataclass(frozen=True)
class PartialSpectrum:
    known: tuple
    missing: tuple = ()
    L: float = 0.0
    ind_f: int = 0
    ind_F: int = 0
    tail_constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "known", tuple(sorted(self.known, key=lambda d: d.n)))
        object.__setattr__(self, "missing", tuple(sorted(self.missing, key=lambda s: s.n)))
        known_n = {d.n for d in self.known}
        for s in self.missing:
            if s.n in known_n:
                raise ValueError(f"index {s.n} is both known and missing")

    @property
    def unknown_count(self) -> int:
        return sum(s.unknown_count for s in self.missing)

    @classmethod
    def from_spectrum(cls, spectrum: Spectrum, delete: dict) -> "PartialSpectrum":
        """Drop data from a full spectrum; ``delete`` maps index -> 'lambda' | 'gamma' | 'both'."""
        known, missing = [], []
        for d in spectrum.data:
            which = delete.get(d.n)
            if which is None:
                known.append(d)
            elif which == "both":
                missing.append(MissingSlot(d.n, "both"))
            elif which == "lambda":
                missing.append(MissingSlot(d.n, "lambda", gamma_n=d.gamma_n))
            else:
                missing.append(MissingSlot(d.n, "gamma", lambda_n=d.lambda_n, beta_n=d.beta_n))
        return cls(tuple(known), tuple(missing), spectrum.L, spectrum.ind_f, spectrum.ind_F, spectrum.tail_constant)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "ind_f": self.ind_f,
            "ind_F": self.ind_F,
            "tail_constant": self.tail_constant,
            "data": [d.to_dict() for d in self.known],
            "missing": [s.to_dict() for s in self.missing],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PartialSpectrum":
        ind_f, ind_F = int(data["ind_f"]), int(data["ind_F"])
        return cls(
            tuple(SpectralDatum.from_dict(d) for d in data.get("data", [])),
            tuple(MissingSlot.from_dict(s) for s in data.get("missing", [])),
            float(data.get("L", (ind_f + ind_F) / 2.0)),
            ind_f,
            ind_F,
            float(data.get("tail_constant", 0.0)),
        )


@dataclass
class _Block:
    """One endpoint's identity system with the known part of its sigma sums folded in."""

    m: int
    matrix: np.ndarray
    rhs: np.ndarray
    sigma_known: np.ndarray
    slot_weight: list = field(default_factory=list)  # per slot: ('w', factor) or ('v', index)


def _known_sigmas(indices, lambdas, weights, m, L, tail) -> np.ndarray:
    out = np.zeros(m + 1)
    for k in range(m + 1):
        terms = lambdas**k * weights
        if k == m:
            terms = terms - regularization_offsets(indices, L)
        out[k] = terms.sum()
        if tail and len(indices):
            out[k] += asymptotic_tail(indices, terms, L, 2 * (m - k))
    return out


def recover_missing(
    partial: PartialSpectrum,
    f: RationalHNFunction,
    F: RationalHNFunction,
    tol: float = 1e-10,
    max_iter: int = 50,
    tail: bool = True,
    full_output: bool = False,
):
    """Fill in missing eigenvalues / norming constants from the identities."""
    m_f, m_F = index(f), index(F)
    if not partial.missing:
        spec = Spectrum(partial.known, partial.L, partial.ind_f, partial.ind_F, partial.tail_constant)
        return (spec, {"residual": 0.0, "iterations": 0}) if full_output else spec

    n_missing = partial.unknown_count
    if n_missing > m_f + m_F + 2:
        raise UnderdeterminedProblem(
            f"underdetermined: {n_missing} missing values exceed ind f + ind F + 2 = {m_f + m_F + 2}"
        )

    known = partial.known
    idx = np.array([d.n for d in known], dtype=float)
    lam_k = np.array([d.lambda_n for d in known])
    gam_k = np.array([d.gamma_n for d in known])
    beta_k = np.array([np.nan if d.beta_n is None else d.beta_n for d in known])
    L = partial.L

    blocks = []
    sys_f = sigma_system(omega_poly(f))
    blocks.append(_Block(m_f, sys_f.matrix, sys_f.rhs, _known_sigmas(idx, lam_k, 1.0 / gam_k, m_f, L, tail),
                         [("w", 1.0)] * len(partial.missing)))

    # Unknown layout: per slot [lambda?][w = 1/gamma?], then right-end weights v = 1/(beta^2 gamma).
    layout = []
    pos = 0
    for s in partial.missing:
        li = pos if s.lambda_missing else None
        pos += int(s.lambda_missing)
        wi = pos if s.gamma_missing else None
        pos += int(s.gamma_missing)
        layout.append((li, wi))
    n_unknown = pos

    extra_v = [s for s in partial.missing if s.beta_n is None]
    can_use_right = np.all(np.isfinite(beta_k)) and len(known) > 0
    # Right-end identities only when the left ones alone cannot pin the unknowns down.
    if n_unknown > m_f + 1 and can_use_right and m_F + 1 >= len(extra_v):
        sys_F = sigma_system(omega_poly(F))
        weights = []
        for s in partial.missing:
            if s.beta_n is None:
                weights.append(("v", n_unknown))
                n_unknown += 1
            else:
                weights.append(("w", 1.0 / s.beta_n**2))
        blocks.append(_Block(m_F, sys_F.matrix, sys_F.rhs,
                             _known_sigmas(idx, lam_k, 1.0 / (beta_k**2 * gam_k), m_F, L, tail), weights))

    n_eq = sum(b.m + 1 for b in blocks)
    if n_unknown > n_eq:
        raise UnderdeterminedProblem(f"underdetermined: {n_unknown} unknowns but only {n_eq} identities")

    def unpack(u):
        lams, ws = [], []
        for s, (li, wi) in zip(partial.missing, layout):
            lams.append(u[li] if li is not None else s.lambda_n)
            ws.append(u[wi] if wi is not None else 1.0 / s.gamma_n)
        return np.array(lams), np.array(ws)

    slot_n = np.array([s.n for s in partial.missing], dtype=float)

    def system(u):
        lams, ws = unpack(u)
        r_all, J_all = [], []
        for b in blocks:
            sig = b.sigma_known.copy()
            dsig = np.zeros((b.m + 1, n_unknown))
            off = regularization_offsets(slot_n, L)
            for j, (s, (li, wi), (kind, val)) in enumerate(zip(partial.missing, layout, b.slot_weight)):
                weight = ws[j] * val if kind == "w" else u[val]
                for k in range(b.m + 1):
                    sig[k] += lams[j] ** k * weight - (off[j] if k == b.m else 0.0)
                    if li is not None and k > 0:
                        dsig[k, li] += k * lams[j] ** (k - 1) * weight
                    if kind == "w" and wi is not None:
                        dsig[k, wi] += lams[j] ** k * val
                    elif kind == "v":
                        dsig[k, val] += lams[j] ** k
            r_all.append(b.matrix @ sig - b.rhs)
            J_all.append(b.matrix @ dsig)
        return np.concatenate(r_all), np.vstack(J_all)

    u = _initial_guess(partial, layout, n_unknown, blocks, known, m_f)
    r, J = system(u)
    norm = np.linalg.norm(r)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) < tol:
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        if np.linalg.norm(step) <= 1e-13 * (1.0 + np.linalg.norm(u)):
            break  # least-squares stationary point
        t = 1.0
        accepted = False
        for _ in range(9):  # full step, then up to 8 halvings
            trial = u + t * step
            _, ws = unpack(trial)
            if np.all(ws > 0) and all(trial[i] > 0 for kind, i in blocks[-1].slot_weight if kind == "v"):
                r_new, J_new = system(trial)
                if np.linalg.norm(r_new) < norm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if np.linalg.norm(step) <= 1e-8 * (1.0 + np.linalg.norm(u)):
                break
            raise NoConvergence("damped Newton could not reduce the identity residual", residual=float(np.max(np.abs(r))))
        u, r, J = trial, r_new, J_new
        norm = np.linalg.norm(r)
    else:
        if np.max(np.abs(r)) >= tol and n_unknown == n_eq:
            raise NoConvergence(f"no convergence after {max_iter} iterations", residual=float(np.max(np.abs(r))))
    final = float(np.max(np.abs(r)))
    # Overdetermined systems settle at the least-squares residual of the (approximate) sigma data.
    if final > tol and n_unknown == n_eq:
        raise NoConvergence(f"identity residual {final:g} above tolerance after {it} iterations", residual=final)

    lams, ws = unpack(u)
    data = {d.n: d for d in known}
    for j, s in enumerate(partial.missing):
        beta_n = s.beta_n
        data[s.n] = SpectralDatum(s.n, float(lams[j]), float(1.0 / ws[j]), beta_n, None)
    ordered = [data[n] for n in sorted(data)]
    lam_all = np.array([d.lambda_n for d in ordered])
    if np.any(np.diff(lam_all) <= 0):
        raise NoConvergence("recovered eigenvalues break the strict ordering", residual=final)
    spec = Spectrum(tuple(ordered), partial.L, partial.ind_f, partial.ind_F, partial.tail_constant)
    if full_output:
        return spec, {"residual": final, "iterations": it, "equations": n_eq, "unknowns": n_unknown}
    return spec


def _initial_guess(partial, layout, n_unknown, blocks, known, m_f) -> np.ndarray:
    u = np.zeros(n_unknown)
    known_by_n = {d.n: d.lambda_n for d in known}
    shift = 2.0 * partial.tail_constant / math.pi
    for s, (li, wi) in zip(partial.missing, layout):
        lam = s.lambda_n
        if lam is None:
            lam = (s.n - partial.L) ** 2 + shift
            lo, hi = known_by_n.get(s.n - 1), known_by_n.get(s.n + 1)
            if lo is not None and hi is not None and not lo < lam < hi:
                lam = 0.5 * (lo + hi)
            elif hi is not None and lam >= hi:
                nxt = known_by_n.get(s.n + 2)
                lam = hi - (nxt - hi if nxt is not None else 1.0)
            elif lo is not None and lam <= lo:
                lam = lo + 1.0
        if li is not None:
            u[li] = lam
        if wi is not None:
            g = s.gamma_n if s.gamma_n is not None else (math.pi / 2) * max(abs(lam), 1.0) ** m_f
            u[wi] = 1.0 / g
    if len(blocks) > 1:
        for (kind, i), s in zip(blocks[1].slot_weight, partial.missing):
            if kind == "v":
                lam = u[layout[partial.missing.index(s)][0]] if layout[partial.missing.index(s)][0] is not None else s.lambda_n
                u[i] = 1.0 / ((math.pi / 2) * max(abs(lam), 1.0) ** blocks[1].m)
    return u
