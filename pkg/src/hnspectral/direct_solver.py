"""Direct spectral problem for -y'' + q y = lam y with rational boundary coefficients.

The left solution phi starts from (f_down(lam), -f_up(lam)) at x = 0, the right
solution psi from (F_down(lam), F_up(lam)) at x = pi.  Eigenvalues are the
zeros of

    chi(lam) = F_up(lam) phi(pi, lam) - F_down(lam) phi'(pi, lam),

located by a sign-change scan laid out on the asymptotic grid
sqrt(lam) ~ n - L + 1/2 and refined by safeguarded Newton iteration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from . import _integrator
from .errors import (
    BracketingFailure,
    DegenerateEigenfunction,
    IntegrationFailure,
    NonPositiveNorming,
    NotAnEigenvalue,
)
from .hn_functions import RationalHNFunction, RealPolynomial, index, up_down

logger = logging.getLogger(__name__)

__all__ = [
    "PotentialSpec",
    "SolverParams",
    "ProblemSpec",
    "SpectralDatum",
    "Spectrum",
    "PhiResult",
    "PsiResult",
    "integrate_phi",
    "integrate_psi",
    "char_function",
    "char_function_right",
    "find_eigenvalues",
    "norming_constant",
    "beta",
]

PI = math.pi


@dataclass(frozen=True)
class PotentialSpec:
    """Real potential on [0, pi]: ``zero``, ``constant`` or uniformly ``sampled``.

    Sampled values are interpolated piecewise linearly between the nodes
    ``linspace(0, pi, len(values))``.
    """

    kind: str = "zero"
    c: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "sampled"):
            raise ValueError(f"unknown potential type {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "c", float(self.c))
        if self.kind == "sampled" and len(vals) < 2:
            raise ValueError("a sampled potential needs at least 2 values")
        if not all(math.isfinite(v) for v in vals + (self.c,)):
            raise ValueError("potential values must be finite")

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "PotentialSpec":
        return cls("constant", c=c)

    @classmethod
    def sampled(cls, values) -> "PotentialSpec":
        return cls("sampled", values=tuple(values))

    @classmethod
    def from_function(cls, func, n: int = 129) -> "PotentialSpec":
        x = np.linspace(0.0, PI, n)
        return cls.sampled(np.asarray([func(t) for t in x], dtype=float))

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "sampled":
            vals = np.asarray(self.values)
            return np.linspace(0.0, PI, len(vals)), vals
        c = self.c if self.kind == "constant" else 0.0
        return np.array([0.0, PI]), np.array([c, c])

    def __call__(self, x):
        xs, qs = self.nodes()
        return np.interp(x, xs, qs)

    def reflected(self) -> "PotentialSpec":
        """q(pi - x)."""
        if self.kind == "sampled":
            return PotentialSpec.sampled(self.values[::-1])
        return self

    def integral(self) -> float:
        xs, qs = self.nodes()
        return float(np.trapezoid(qs, xs))

    def l1_norm(self) -> float:
        xs, qs = self.nodes()
        # Exact for piecewise linear q up to sign changes inside a cell; good enough for a bound.
        return float(np.trapezoid(np.abs(qs), xs))

    def to_dict(self) -> dict:
        if self.kind == "zero":
            return {"type": "zero"}
        if self.kind == "constant":
            return {"type": "constant", "c": self.c}
        return {"type": "sampled", "values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        kind = data.get("type")
        if kind == "zero":
            return cls.zero()
        if kind == "constant":
            return cls.constant(float(data["c"]))
        if kind == "sampled":
            return cls.sampled([float(v) for v in data["values"]])
        raise ValueError(f"unknown potential type {kind!r}")


@dataclass(frozen=True)
class SolverParams:
    ode_rel_tol: float = 1e-12
    ode_abs_tol: float = 1e-15
    eigen_tol: float = 1e-13
    n_max: int = 100
    max_steps: int = 5_000_000

    def __post_init__(self):
        if int(self.n_max) < 1:
            raise ValueError("n_max must be ≥ 1")
        object.__setattr__(self, "n_max", int(self.n_max))
        for name in ("ode_rel_tol", "ode_abs_tol", "eigen_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "ode_rel_tol": self.ode_rel_tol,
            "ode_abs_tol": self.ode_abs_tol,
            "eigen_tol": self.eigen_tol,
            "n_max": self.n_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverParams":
        known = {k: data[k] for k in ("ode_rel_tol", "ode_abs_tol", "eigen_tol", "n_max", "max_steps") if k in data}
        return cls(**known)


@dataclass(frozen=True)
class ProblemSpec:
    q: PotentialSpec = field(default_factory=PotentialSpec.zero)
    f: RationalHNFunction = field(default_factory=RationalHNFunction)
    F: RationalHNFunction = field(default_factory=RationalHNFunction)
    solver: SolverParams = field(default_factory=SolverParams)

    @cached_property
    def _polys(self):
        f_up, f_down = up_down(self.f)
        F_up, F_down = up_down(self.F)
        return f_up, f_down, f_up.deriv(), f_down.deriv(), F_up, F_down, F_up.deriv(), F_down.deriv()

    @cached_property
    def _nodes(self):
        return self.q.nodes()

    @property
    def ind_f(self) -> int:
        return index(self.f)

    @property
    def ind_F(self) -> int:
        return index(self.F)

    @property
    def L(self) -> float:
        return (self.ind_f + self.ind_F) / 2.0

    def reflected(self) -> "ProblemSpec":
        """The problem for (q(pi - x), F, f); it has the same eigenvalues."""
        return ProblemSpec(q=self.q.reflected(), f=self.F, F=self.f, solver=self.solver)

    def with_solver(self, **kwargs) -> "ProblemSpec":
        return replace(self, solver=replace(self.solver, **kwargs))


@dataclass(frozen=True)
class SpectralDatum:
    n: int
    lambda_n: float
    gamma_n: float
    beta_n: Optional[float] = None
    chi_prime: Optional[float] = None

    def to_dict(self) -> dict:
        return {"n": self.n, "lambda": self.lambda_n, "gamma": self.gamma_n, "beta": self.beta_n, "chi_prime": self.chi_prime}

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralDatum":
        def opt(key):
            v = data.get(key)
            return None if v is None else float(v)

        return cls(int(data["n"]), float(data["lambda"]), float(data["gamma"]), opt("beta"), opt("chi_prime"))


@dataclass(frozen=True)
class Spectrum:
    data: tuple
    L: float
    ind_f: int
    ind_F: int
    tail_constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "data", tuple(self.data))

    def __len__(self):
        return len(self.data)

    @property
    def indices(self) -> np.ndarray:
        return np.array([d.n for d in self.data], dtype=int)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([d.lambda_n for d in self.data])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([d.gamma_n for d in self.data])

    @property
    def betas(self) -> np.ndarray:
        return np.array([np.nan if d.beta_n is None else d.beta_n for d in self.data])

    @property
    def chi_primes(self) -> np.ndarray:
        return np.array([np.nan if d.chi_prime is None else d.chi_prime for d in self.data])

    def truncated(self, n_max: int) -> "Spectrum":
        return replace(self, data=self.data[:n_max])

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "ind_f": self.ind_f,
            "ind_F": self.ind_F,
            "tail_constant": self.tail_constant,
            "data": [d.to_dict() for d in self.data],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Spectrum":
        ind_f, ind_F = int(data["ind_f"]), int(data["ind_F"])
        L = float(data.get("L", (ind_f + ind_F) / 2.0))
        items = tuple(SpectralDatum.from_dict(d) for d in data["data"])
        return cls(items, L, ind_f, ind_F, float(data.get("tail_constant", 0.0)))


class PhiResult(NamedTuple):
    phi_pi: float
    phi_prime_pi: float
    dphi_pi_dlambda: float
    dphi_prime_pi_dlambda: float
    phi_sq_integral: float


class PsiResult(NamedTuple):
    psi_0: float
    psi_prime_0: float
    dpsi_0_dlambda: float
    dpsi_prime_0_dlambda: float


def _omega(spec: ProblemSpec, lam: float) -> float:
    return math.sqrt(max(abs(lam), 1.0))


def _run(spec: ProblemSpec, lam: float, y0: np.ndarray, forward: bool, nvar: int):
    # Linear system: normalize the initial data, integrate, undo the scaling.
    w = _omega(spec, lam)
    norm = max(abs(y0[0]), abs(y0[1]) / w)
    if norm == 0.0:
        norm = 1.0
    xs, qs = spec._nodes
    sol = spec.solver
    y, log_scale, status, _ = _integrator.shoot(
        float(lam), y0 / norm, forward, xs, qs, nvar, sol.ode_rel_tol, sol.ode_abs_tol, sol.max_steps
    )
    if status != _integrator.OK or not np.all(np.isfinite(y)):
        reason = {1: "step budget exhausted", 2: "step size underflow"}.get(int(status), "non-finite state")
        raise IntegrationFailure(f"integration failed at lambda={lam!r}: {reason}")
    factor = norm * math.exp(log_scale)
    out = y * factor
    if nvar > 4:
        out[4] = y[4] * factor * factor
    return out


def integrate_phi(spec: ProblemSpec, lam: float) -> PhiResult:
    """phi and its lam-derivative at x = pi, plus the integral of phi**2 over [0, pi]."""
    f_up, f_down, df_up, df_down = spec._polys[:4]
    y0 = np.array([f_down(lam), -f_up(lam), df_down(lam), -df_up(lam), 0.0])
    return PhiResult(*_run(spec, lam, y0, True, 5))


def integrate_psi(spec: ProblemSpec, lam: float) -> PsiResult:
    """psi and its lam-derivative at x = 0 (integrated backward from pi)."""
    F_up, F_down, dF_up, dF_down = spec._polys[4:]
    y0 = np.array([F_down(lam), F_up(lam), dF_down(lam), dF_up(lam), 0.0])
    return PsiResult(*_run(spec, lam, y0, False, 4))


def _chi_from_phi(spec: ProblemSpec, lam: float, r: PhiResult) -> tuple[float, float]:
    F_up, F_down, dF_up, dF_down = spec._polys[4:]
    Fu, Fd = F_up(lam), F_down(lam)
    chi = Fu * r.phi_pi - Fd * r.phi_prime_pi
    dchi = dF_up(lam) * r.phi_pi + Fu * r.dphi_pi_dlambda - dF_down(lam) * r.phi_prime_pi - Fd * r.dphi_prime_pi_dlambda
    return float(chi), float(dchi)


def char_function(spec: ProblemSpec, lam: float) -> tuple[float, float]:
    """(chi, dchi/dlam) assembled from phi at the right endpoint."""
    return _chi_from_phi(spec, lam, integrate_phi(spec, lam))


def char_function_right(spec: ProblemSpec, lam: float) -> tuple[float, float]:
    """(chi, dchi/dlam) assembled from psi at the left endpoint; a self-check route."""
    f_up, f_down, df_up, df_down = spec._polys[:4]
    r = integrate_psi(spec, lam)
    fu, fd = f_up(lam), f_down(lam)
    chi = fd * r.psi_prime_0 + fu * r.psi_0
    dchi = df_down(lam) * r.psi_prime_0 + fd * r.dpsi_prime_0_dlambda + df_up(lam) * r.psi_0 + fu * r.dpsi_0_dlambda
    return float(chi), float(dchi)


def _chi_signs(spec: ProblemSpec, lams: np.ndarray) -> np.ndarray:
    """Values of chi on a grid, each rescaled by a positive factor (signs are exact)."""
    f_up, f_down = spec._polys[0], spec._polys[1]
    F_up, F_down = spec._polys[4], spec._polys[5]
    w = np.sqrt(np.maximum(np.abs(lams), 1.0))
    a, b = f_down(lams), -f_up(lams)
    norm = np.maximum(np.abs(a), np.abs(b) / w)
    norm[norm == 0] = 1.0
    y0s = np.zeros((lams.size, 5))
    y0s[:, 0], y0s[:, 1] = a / norm, b / norm
    xs, qs = spec._nodes
    sol = spec.solver
    out, status = _integrator.shoot_many(lams, y0s, True, xs, qs, 2, sol.ode_rel_tol, sol.ode_abs_tol, sol.max_steps)
    if np.any(status != _integrator.OK):
        bad = lams[status != _integrator.OK][0]
        raise IntegrationFailure(f"integration failed at lambda={bad!r} during the eigenvalue scan")
    Fu, Fd = F_up(lams), F_down(lams)
    return Fu * out[:, 0] - Fd * out[:, 1]


def _inv_beta_from_phi(spec: ProblemSpec, lam: float, r: PhiResult) -> float:
    F_up, F_down = spec._polys[4], spec._polys[5]
    Fu, Fd = F_up(lam), F_down(lam)
    if abs(Fd) * _omega(spec, lam) >= abs(Fu):
        return r.phi_pi / Fd
    return r.phi_prime_pi / Fu


def _gamma_from_phi(spec: ProblemSpec, lam: float, r: PhiResult) -> float:
    # f'(lam) * f_down(lam)**2 == f_up' f_down - f_up f_down', which stays finite
    # (and continuous) when lam sits on a pole of f.
    f_up, f_down, df_up, df_down, F_up, F_down, dF_up, dF_down = spec._polys
    left = df_up(lam) * f_down(lam) - f_up(lam) * df_down(lam)
    inv_beta = _inv_beta_from_phi(spec, lam, r)
    right = (dF_up(lam) * F_down(lam) - F_up(lam) * dF_down(lam)) * inv_beta * inv_beta
    return float(r.phi_sq_integral + left + right)


def _check_eigenvalue(spec: ProblemSpec, lam: float, chi: float, dchi: float, tol: float = 1e-6) -> None:
    if not abs(chi) <= tol * (1.0 + abs(lam)) * abs(dchi):
        raise NotAnEigenvalue(f"lambda={lam!r} is not an eigenvalue: |chi/chi'| = {abs(chi / dchi) if dchi else math.inf:g}")


def norming_constant(spec: ProblemSpec, lambda_n: float) -> float:
    """gamma_n = int phi^2 + f'(lam) phi(0)^2 + F'(lam) phi(pi)^2 at an eigenvalue."""
    r = integrate_phi(spec, lambda_n)
    chi, dchi = _chi_from_phi(spec, lambda_n, r)
    _check_eigenvalue(spec, lambda_n, chi, dchi)
    gamma = _gamma_from_phi(spec, lambda_n, r)
    if not gamma > 0:
        raise NonPositiveNorming(f"computed gamma={gamma!r} at lambda={lambda_n!r}")
    return gamma


def _beta_from_psi(spec: ProblemSpec, lam: float, r: PsiResult) -> float:
    f_up, f_down = spec._polys[0], spec._polys[1]
    phi0, dphi0 = f_down(lam), -f_up(lam)
    if phi0 == 0.0 and dphi0 == 0.0:
        raise DegenerateEigenfunction(f"phi(0) and phi'(0) both vanish at lambda={lam!r}")
    if abs(phi0) * _omega(spec, lam) >= abs(dphi0):
        return float(r.psi_0 / phi0)
    return float(r.psi_prime_0 / dphi0)


def beta(spec: ProblemSpec, lambda_n: float) -> float:
    """The constant with psi(x, lam_n) = beta_n * phi(x, lam_n)."""
    return _beta_from_psi(spec, lambda_n, integrate_psi(spec, lambda_n))


# --- eigenvalue search -----------------------------------------------------


def _magnitude_bound(spec: ProblemSpec) -> float:
    vals = [spec.q.l1_norm()]
    for g in (spec.f, spec.F):
        vals += [abs(g.h), g.h0] + [abs(hk) for hk, _ in g.poles] + [dk for _, dk in g.poles]
    return 1.0 + max(vals)


def _scan_grid(spec: ProblemSpec, lam_low: float, top_index: int, level: int) -> np.ndarray:
    L = spec.L
    refine = 2**level
    poles = [hk for g in (spec.f, spec.F) for hk, _ in g.poles]
    # Fine region must reach past every pole and the Robin-type shifts.
    s_fine = 10.0 + math.sqrt(max([0.0] + poles)) + math.sqrt(_magnitude_bound(spec))
    s_top = top_index - L + 0.5

    t = np.sqrt(-lam_low) * (1.0 - (np.arange(64 * refine) + 0.5) / (64 * refine)) ** 2
    neg = -(t**2)
    hs = 0.125 / refine
    s_fine = min(s_fine, s_top)
    pos = (np.arange(int(math.ceil(s_fine / hs))) + 0.5) * hs
    n_lo = int(math.floor(s_fine + L)) + 1
    coarse = np.arange(n_lo, top_index + 1) - L + 0.5
    if refine > 1:
        sub = (np.arange(1, refine) / refine)[None, :]
        coarse = np.concatenate([coarse, (coarse[:, None] - sub).ravel()])
    pos = np.concatenate([pos, coarse[coarse > s_fine]])
    grid = np.concatenate([neg, pos**2, np.array(poles, dtype=float)])
    grid = np.unique(grid[(grid >= lam_low) & (grid <= s_top**2)])
    return np.concatenate([[lam_low], grid, [s_top**2]]) if grid[0] > lam_low else np.append(grid, s_top**2)


def _brackets(grid: np.ndarray, vals: np.ndarray) -> list[tuple[float, float, float, float]]:
    out = []
    i = 0
    n = len(grid)
    while i < n - 1:
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            out.append((a, a, 0.0, 0.0))
        elif fa * fb < 0:
            out.append((a, b, fa, fb))
        i += 1
    return out


def _refine_root(spec: ProblemSpec, a: float, b: float, fa: float) -> tuple[float, PhiResult, float, float]:
    """Safeguarded Newton on chi inside the sign-change bracket [a, b]."""
    tol = spec.solver.eigen_tol
    if a == b:
        r = integrate_phi(spec, a)
        return (a, r) + _chi_from_phi(spec, a, r)
    sa = math.copysign(1.0, fa)
    x = 0.5 * (a + b)
    for _ in range(200):
        r = integrate_phi(spec, x)
        chi, dchi = _chi_from_phi(spec, x, r)
        if chi == 0.0:
            return x, r, chi, dchi
        if math.copysign(1.0, chi) == sa:
            a = x
        else:
            b = x
        step = chi / dchi if dchi != 0 else math.inf
        x_new = x - step
        if not (a < x_new < b) or not math.isfinite(x_new):
            x_new = 0.5 * (a + b)
        converged = abs(x_new - x) <= tol * (1.0 + abs(x)) or (b - a) <= tol * (1.0 + abs(x))
        x = x_new
        if converged:
            r = integrate_phi(spec, x)
            return (x, r) + _chi_from_phi(spec, x, r)
    raise BracketingFailure(f"root refinement in [{a!r}, {b!r}] did not converge")


def _fit_tail_constant(indices: np.ndarray, lambdas: np.ndarray, L: float, n_max: int) -> float:
    # sqrt(lam_n) - (n - L) ~ T / (pi (n - L)) from the chi asymptotics.
    mask = (indices - L) > 0.5
    k = max(5, n_max // 4)
    idx, lam = indices[mask][-k:], lambdas[mask][-k:]
    if idx.size < 2 or np.any(lam <= 0):
        return 0.0
    x = 1.0 / (PI * (idx - L))
    e = np.sqrt(lam) - (idx - L)
    return float(np.dot(x, e) / np.dot(x, x))


def find_eigenvalues(spec: ProblemSpec, n_max: int | None = None, with_beta: bool = True) -> Spectrum:
    """Lowest ``n_max`` eigenvalues with their norming constants, beta's and chi'."""
    n_max = spec.solver.n_max if n_max is None else int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be ≥ 1")
    L = spec.L
    top_index = max(n_max, 30)
    expected = top_index + 1
    lam_low = -(_magnitude_bound(spec) ** 2)

    brackets = None
    found = 0
    for _extend in range(4):
        for level in range(4):
            grid = _scan_grid(spec, lam_low, top_index, level)
            vals = _chi_signs(spec, grid)
            brackets = _brackets(grid, vals)
            found = len(brackets)
            logger.debug("scan level %d, lam_low=%g: %d sign changes, %d expected", level, lam_low, found, expected)
            if found >= expected:
                break
        if found >= expected:
            break
        lam_low *= 4.0
    if found != expected:
        raise BracketingFailure(
            f"found {found} sign changes of chi below ({top_index} - L + 1/2)^2, expected {expected}"
        )

    data = []
    for n, (a, b, fa, _fb) in enumerate(brackets[:n_max]):
        lam, r, chi, dchi = _refine_root(spec, a, b, fa)
        gamma = _gamma_from_phi(spec, lam, r)
        if not gamma > 0:
            raise NonPositiveNorming(f"computed gamma={gamma!r} for lambda_{n}={lam!r}")
        b_n = beta(spec, lam) if with_beta else None
        data.append(SpectralDatum(n, lam, gamma, b_n, dchi))

    lams = np.array([d.lambda_n for d in data])
    if np.any(np.diff(lams) <= 0):
        raise BracketingFailure("refined eigenvalues are not strictly increasing")
    tail = _fit_tail_constant(np.arange(len(data)), lams, L, n_max)
    return Spectrum(tuple(data), L, spec.ind_f, spec.ind_F, tail)
