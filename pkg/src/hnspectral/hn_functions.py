"""Rational Herglotz-Nevanlinna functions and the polynomials attached to them.

A boundary coefficient is stored in partial-fraction form

    f(lam) = h0*lam + h + sum_k delta_k / (h_k - lam)

and converted on demand into the numerator/denominator pair ``(f_up, f_down)``
and into the monic polynomial whose coefficients ``omega_1, ..., omega_{ind+1}``
enter the identity system (see :mod:`hnspectral.identity_engine`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateInput, NotHerglotz, PoleProximity

__all__ = [
    "RealPolynomial",
    "RationalHNFunction",
    "OmegaVector",
    "evaluate",
    "evaluate_derivative",
    "up_down",
    "index",
    "omega_poly",
    "omega_to_hn",
    "resultant",
    "polynomial_roots",
]

POLE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RealPolynomial:
    """Dense real polynomial, coefficients in ascending degree order.

    Trailing zeros are stripped on construction; the zero polynomial is
    stored as ``(0.0,)`` and has degree -1.
    """

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        c = [float(x) for x in np.atleast_1d(np.asarray(self.coeffs, dtype=float))]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_roots(cls, roots: Iterable[float], lead: float = 1.0) -> "RealPolynomial":
        roots = list(roots)
        return cls(lead * P.polyfromroots(roots)) if roots else cls((lead,))

    @property
    def degree(self) -> int:
        if len(self.coeffs) == 1 and self.coeffs[0] == 0.0:
            return -1
        return len(self.coeffs) - 1

    @property
    def lead(self) -> float:
        return self.coeffs[-1]

    def is_zero(self) -> bool:
        return self.degree < 0

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs)

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def deriv(self) -> "RealPolynomial":
        return RealPolynomial(P.polyder(self.coeffs)) if len(self.coeffs) > 1 else RealPolynomial()

    def __add__(self, other):
        other = _as_poly(other)
        return RealPolynomial(P.polyadd(self.coeffs, other.coeffs))

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_poly(other)
        return RealPolynomial(P.polysub(self.coeffs, other.coeffs))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __neg__(self):
        return RealPolynomial(-self.as_array())

    def __mul__(self, other):
        other = _as_poly(other)
        return RealPolynomial(P.polymul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __divmod__(self, other):
        other = _as_poly(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        q, r = P.polydiv(self.coeffs, other.coeffs)
        return RealPolynomial(q), RealPolynomial(r)

    def compose_square(self) -> "RealPolynomial":
        """Return p(lam**2)."""
        c = np.zeros(2 * len(self.coeffs) - 1)
        c[::2] = self.coeffs
        return RealPolynomial(c)

    def roots(self) -> np.ndarray:
        return polynomial_roots(self.coeffs)


def _as_poly(x) -> RealPolynomial:
    if isinstance(x, RealPolynomial):
        return x
    return RealPolynomial((float(x),))


def polynomial_roots(coeffs: Sequence[float], polish: bool = True) -> np.ndarray:
    """Roots via companion-matrix eigenvalues, each refined by one Newton step."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if c.size <= 1:
        return np.empty(0, dtype=complex)
    roots = np.linalg.eigvals(P.polycompanion(c))
    if polish:
        dc = P.polyder(c)
        for i, z in enumerate(roots):
            d = P.polyval(z, dc)
            if d != 0:
                roots[i] = z - P.polyval(z, c) / d
    return roots


@dataclass(frozen=True)
class RationalHNFunction:
    """f(lam) = h0*lam + h + sum delta_k / (h_k - lam), with poles sorted by h_k."""

    h0: float = 0.0
    h: float = 0.0
    poles: tuple = field(default=())

    def __post_init__(self):
        poles = tuple((float(hk), float(dk)) for hk, dk in self.poles)
        object.__setattr__(self, "h0", float(self.h0))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "poles", poles)
        if not (self.h0 >= 0.0 and math.isfinite(self.h0)):
            raise NotHerglotz(f"h0 must be a finite nonnegative number, got {self.h0}")
        if not math.isfinite(self.h):
            raise NotHerglotz("h must be finite")
        for hk, dk in poles:
            if not (dk > 0.0 and math.isfinite(dk) and math.isfinite(hk)):
                raise NotHerglotz(f"pole weights must be positive, got delta={dk}")
        hs = [hk for hk, _ in poles]
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise NotHerglotz("pole locations must be strictly increasing")

    @property
    def d(self) -> int:
        return len(self.poles)

    @property
    def pole_locations(self) -> np.ndarray:
        return np.array([hk for hk, _ in self.poles])

    @property
    def pole_weights(self) -> np.ndarray:
        return np.array([dk for _, dk in self.poles])

    def __call__(self, lam: float) -> float:
        return evaluate(self, lam)

    def derivative(self, lam: float) -> float:
        return evaluate_derivative(self, lam)

    @property
    def index(self) -> int:
        return index(self)

    def up_down(self):
        return up_down(self)

    def to_dict(self) -> dict:
        return {
            "h0": self.h0,
            "h": self.h,
            "poles": [{"hk": hk, "delta": dk} for hk, dk in self.poles],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RationalHNFunction":
        poles = sorted((float(p["hk"]), float(p["delta"])) for p in data.get("poles", []))
        return cls(h0=float(data.get("h0", 0.0)), h=float(data.get("h", 0.0)), poles=tuple(poles))


def _check_pole(f: RationalHNFunction, lam: float, tol: float | None) -> None:
    tol = POLE_TOLERANCE * (1.0 + abs(lam)) if tol is None else tol
    for hk, _ in f.poles:
        if abs(lam - hk) < tol:
            raise PoleProximity(f"lambda={lam!r} is within {tol:g} of the pole {hk!r}")


def evaluate(f: RationalHNFunction, lam: float, pole_tolerance: float | None = None) -> float:
    _check_pole(f, lam, pole_tolerance)
    return f.h0 * lam + f.h + sum(dk / (hk - lam) for hk, dk in f.poles)


def evaluate_derivative(f: RationalHNFunction, lam: float, pole_tolerance: float | None = None) -> float:
    _check_pole(f, lam, pole_tolerance)
    return f.h0 + sum(dk / (hk - lam) ** 2 for hk, dk in f.poles)


def index(f: RationalHNFunction) -> int:
    return 2 * f.d + (1 if f.h0 > 0 else 0)


def up_down(f: RationalHNFunction) -> tuple[RealPolynomial, RealPolynomial]:
    """Return ``(f_up, f_down)`` with f = f_up / f_down.

    ``f_down = h0' * prod(h_k - lam)`` where ``h0' = 1/h0`` if ``h0 > 0`` and 1
    otherwise.
    """
    scale = 1.0 / f.h0 if f.h0 > 0 else 1.0
    factors = [RealPolynomial((hk, -1.0)) for hk, _ in f.poles]

    prod_all = RealPolynomial((1.0,))
    for fac in factors:
        prod_all = prod_all * fac
    # Linear part is pre-scaled so that h0' * h0 is exactly one.
    linear = RealPolynomial((f.h / f.h0, 1.0)) if f.h0 > 0 else RealPolynomial((f.h,))
    up = linear * prod_all
    for k, (_, dk) in enumerate(f.poles):
        others = RealPolynomial((1.0,))
        for j, fac in enumerate(factors):
            if j != k:
                others = others * fac
        up = up + (scale * dk) * others
    return up, scale * prod_all


@dataclass(frozen=True)
class OmegaVector:
    """Coefficients omega_1..omega_{ind_f+1} of the monic omega polynomial."""

    ind_f: int
    omegas: tuple

    def __post_init__(self):
        om = tuple(float(x) for x in self.omegas)
        object.__setattr__(self, "omegas", om)
        if self.ind_f < 0 or len(om) != self.ind_f + 1:
            raise ValueError(f"expected {self.ind_f + 1} omegas, got {len(om)}")

    def full(self) -> np.ndarray:
        """Array ``[omega_0=1, omega_1, ..., omega_{ind_f+1}]``."""
        return np.concatenate(([1.0], self.omegas))

    def polynomial(self) -> RealPolynomial:
        return RealPolynomial(self.full()[::-1])


def _omega_signs(ind_f: int) -> tuple[int, int]:
    return (-1) ** (ind_f // 2), (-1) ** (-(-ind_f // 2))


def omega_poly(f: RationalHNFunction) -> OmegaVector:
    m = index(f)
    up, down = up_down(f)
    s_down, s_up = _omega_signs(m)
    poly = s_down * (RealPolynomial((0.0, 1.0)) * down.compose_square()) - s_up * up.compose_square()
    c = np.zeros(m + 2)
    c[: len(poly.coeffs)] = poly.coeffs
    # c[m+1] is 1 up to rounding in h0' * h0; the leading one is implicit.
    return OmegaVector(m, tuple(c[m::-1]))


def omega_to_hn(omegas: OmegaVector, root_tol: float = 1e-8) -> RationalHNFunction:
    """Invert :func:`omega_poly`: split by parity, then read off poles and residues."""
    m = omegas.ind_f
    c = omegas.full()[::-1]  # ascending powers, c[m+1] == 1
    s_down, s_up = _omega_signs(m)
    d = m // 2
    down = np.array([c[2 * j + 1] for j in range(d + 1)]) * s_down
    up = np.array([c[2 * j] for j in range((m + 1) // 2 + 1)]) * (-s_up)
    if m % 2 == 1:
        lead = down[d]
        # lead = (-1)^d / h0
        if not lead * (-1) ** d > 0:
            raise NotHerglotz(f"leading coefficient of f_down has the wrong sign ({lead:g}); h0 would be <= 0")
        h0 = (-1) ** d / lead
    else:
        h0 = 0.0
    down_poly = RealPolynomial(down)
    up_poly = RealPolynomial(up)

    poles = []
    if d > 0:
        roots = down_poly.roots()
        if np.any(np.abs(roots.imag) > root_tol * (1.0 + np.abs(roots))):
            raise NotHerglotz(f"f_down has non-real roots: {roots}")
        hk = np.sort(roots.real)
        if np.any(np.diff(hk) <= root_tol * (1.0 + np.abs(hk[1:]))):
            raise NotHerglotz(f"f_down has repeated roots: {hk}")
        ddown = down_poly.deriv()
        for x in hk:
            delta = -up_poly(x) / ddown(x)
            if not delta > 0:
                raise NotHerglotz(f"nonpositive residue {delta:g} at pole {x:g}")
            poles.append((float(x), float(delta)))

    quotient, _ = divmod(up_poly, down_poly)
    qc = list(quotient.coeffs) + [0.0, 0.0]
    h = qc[0]
    return RationalHNFunction(h0=h0, h=h, poles=tuple(poles))


def sylvester_matrix(p: RealPolynomial, q: RealPolynomial) -> np.ndarray:
    m, n = max(p.degree, 0), max(q.degree, 0)
    size = m + n
    S = np.zeros((size, size))
    pd = np.array(p.coeffs[::-1])
    qd = np.array(q.coeffs[::-1])
    for i in range(n):
        S[i, i : i + m + 1] = pd
    for i in range(m):
        S[n + i, i : i + n + 1] = qd
    return S


def resultant(p: RealPolynomial, q: RealPolynomial) -> float:
    """Resultant of ``p`` and ``q`` as the determinant of their Sylvester matrix."""
    p, q = _as_poly(p), _as_poly(q)
    if p.is_zero() and q.is_zero():
        raise DegenerateInput("resultant of two zero polynomials is undefined")
    # The zero polynomial is taken with formal degree 0, so the Sylvester
    # matrix is built from the other polynomial alone: empty (det 1) against a
    # nonzero constant, all zeros against anything with roots.
    if p.is_zero() or q.is_zero():
        other = q if p.is_zero() else p
        return 1.0 if other.degree == 0 else 0.0
    if p.degree == 0 and q.degree == 0:
        return 1.0
    return float(np.linalg.det(sylvester_matrix(p, q)))
