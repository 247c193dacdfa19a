"""Built-in oracle suite behind ``hnspectral selfcheck``.

Each check compares the library against something computed independently
(closed forms, bisection, exact algebra) and returns ``(name, ok, detail)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .direct_solver import PotentialSpec, ProblemSpec, SolverParams, find_eigenvalues
from .hn_functions import RationalHNFunction, omega_poly, resultant, up_down
from .identity_engine import residuals, solve_for_omega, solve_for_sigma, system_determinant
from .spectral_sums import sigma_vector


def robin_char(lam: float, h: float, H: float) -> float:
    """chi for q = 0, f = h, F = H from phi = cos(s x) - h sin(s x) / s."""
    s = np.sqrt(complex(lam))
    if abs(s) < 1e-12:
        phi, dphi = 1.0 - h * math.pi, -h
    else:
        phi = np.cos(s * math.pi) - h * np.sin(s * math.pi) / s
        dphi = -s * np.sin(s * math.pi) - h * np.cos(s * math.pi)
    return float(np.real(H * phi - dphi))


def robin_eigenvalues(h: float, H: float, count: int, lam_low: float = -50.0) -> np.ndarray:
    grid = np.concatenate((np.linspace(lam_low, 0.0, 2001)[:-1], np.linspace(0.0, (count + 2.0) ** 2, 40 * (count + 2))))
    vals = np.array([robin_char(x, h, H) for x in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(robin_char, a, b, args=(h, H), xtol=1e-14, rtol=1e-15))
        if len(roots) == count:
            break
    return np.array(roots)


def _check_neumann():
    spec = ProblemSpec(solver=SolverParams(n_max=10))
    s = find_eigenvalues(spec)
    err = max(np.max(np.abs(s.lambdas - np.arange(10) ** 2)), abs(s.gammas[0] - math.pi), np.max(np.abs(s.gammas[1:] - math.pi / 2)))
    return "Neumann spectrum n^2, gamma = pi, pi/2", err < 1e-8, f"max error {err:.2e}"


def _check_robin():
    h = H = 1.0
    spec = ProblemSpec(f=RationalHNFunction(h=h), F=RationalHNFunction(h=H), solver=SolverParams(n_max=8))
    s = find_eigenvalues(spec, with_beta=False)
    oracle = robin_eigenvalues(h, H, 8)
    err = float(np.max(np.abs(s.lambdas - oracle)))
    return "Robin eigenvalues vs closed-form bisection", err < 1e-8, f"max error {err:.2e}"


def _random_hn(rng, ind):
    h0 = float(rng.uniform(0.5, 2.0)) if ind % 2 else 0.0
    d = ind // 2
    hk = np.sort(rng.uniform(-3, 3, d))
    while d > 1 and np.min(np.diff(hk)) < 0.2:
        hk = np.sort(rng.uniform(-3, 3, d))
    poles = tuple((float(x), float(rng.uniform(0.3, 2.0))) for x in hk)
    return RationalHNFunction(h0, float(rng.uniform(-1, 1)), poles)


def _check_round_trip():
    rng = np.random.default_rng(7)
    worst = 0.0
    worst_det = 0.0
    for trial in range(30):
        f = _random_hn(rng, trial % 6)
        om = omega_poly(f)
        sig = solve_for_sigma(om)
        back = solve_for_sigma(solve_for_omega(sig))
        worst = max(worst, float(np.max(np.abs(back.as_array() - sig.as_array()) / (1 + np.abs(sig.as_array())))))
        up, down = up_down(f)
        r = abs(resultant(down, up))
        worst_det = max(worst_det, abs(abs(system_determinant(om)) - r) / r)
    ok = worst < 1e-10 and worst_det < 1e-8
    return "sigma/omega round trip and |det| = |resultant|", ok, f"round trip {worst:.2e}, det {worst_det:.2e}"


def _check_identities():
    f = RationalHNFunction(h0=1.0)
    spec = ProblemSpec(q=PotentialSpec.constant(1.0), f=f, solver=SolverParams(n_max=100))
    sig = sigma_vector(find_eigenvalues(spec, with_beta=False))
    res = float(np.max(np.abs(residuals(omega_poly(f), sig))))
    return "identities for f = lambda, q = 1", res < 1e-4, f"sigma = {np.round(sig.as_array(), 6).tolist()}, residual {res:.2e}"


CHECKS = (_check_neumann, _check_robin, _check_round_trip, _check_identities)


def run_all():
    out = []
    for check in CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # report, do not abort the suite
            out.append((check.__name__.lstrip("_"), False, f"{type(exc).__name__}: {exc}"))
    return out
