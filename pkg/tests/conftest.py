import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from hnspectral import PotentialSpec, ProblemSpec, RationalHNFunction, SolverParams, find_eigenvalues
from hnspectral.hn_functions import evaluate, evaluate_derivative, up_down

ZERO = RationalHNFunction()
ROBIN1 = RationalHNFunction(h=1.0)
CONST2 = RationalHNFunction(h=2.0)
LINEAR = RationalHNFunction(h0=1.0)
ONE_POLE = RationalHNFunction(poles=((2.0, 1.0),))


def sin_like(x):
    return 1.0 + np.sin(3.0 * x) + 0.3 * x


SAMPLED = PotentialSpec.from_function(sin_like, 129)
Q0 = PotentialSpec.zero()
Q1 = PotentialSpec.constant(1.0)


_CACHE = {}


def spectrum_of(q, f, F, n_max, with_beta=True):
    """Memoized direct solve shared across test modules."""
    key = json.dumps([q.to_dict(), f.to_dict(), F.to_dict(), n_max, with_beta], sort_keys=True)
    if key not in _CACHE:
        _CACHE[key] = find_eigenvalues(ProblemSpec(q, f, F, SolverParams(n_max=n_max)), with_beta=with_beta)
    return _CACHE[key]


# --- closed-form q = 0 oracles -------------------------------------------------
# phi(x) = f_down cos(s x) - f_up sin(s x) / s,  psi(x) = F_down cos(s(pi - x)) - F_up sin(s(pi - x)) / s


def _sinc_pi(s, x):
    return x if abs(s) < 1e-14 else np.sin(s * x) / s


def phi_closed(f, lam, x):
    up, down = up_down(f)
    s = np.sqrt(complex(lam))
    val = down(lam) * np.cos(s * x) - up(lam) * _sinc_pi(s, x)
    der = -down(lam) * s * np.sin(s * x) - up(lam) * np.cos(s * x)
    return float(np.real(val)), float(np.real(der))


def psi_closed(F, lam, x):
    up, down = up_down(F)
    s = np.sqrt(complex(lam))
    t = math.pi - x
    val = down(lam) * np.cos(s * t) - up(lam) * _sinc_pi(s, t)
    der = down(lam) * s * np.sin(s * t) + up(lam) * np.cos(s * t)
    return float(np.real(val)), float(np.real(der))


def chi_closed(f, F, lam):
    up, down = up_down(F)
    p, dp = phi_closed(f, lam, math.pi)
    return up(lam) * p - down(lam) * dp


def eigenvalues_closed(f, F, count, lam_low=-60.0):
    """Bisection on the closed-form chi over a fine grid."""
    hi = (count + 3.0) ** 2
    grid = np.concatenate((np.linspace(lam_low, 0.0, 3001)[:-1], np.linspace(0.0, hi, 200 * (count + 3))))
    vals = np.array([chi_closed(f, F, x) for x in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(lambda x: chi_closed(f, F, x), a, b, xtol=1e-15, rtol=1e-15))
        if len(roots) == count:
            break
    return np.array(roots)


def gamma_closed(f, F, lam):
    """Quadrature of phi**2 plus the boundary terms, evaluated from f and F directly."""
    integral = quad(lambda x: phi_closed(f, lam, x)[0] ** 2, 0.0, math.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    phi0 = phi_closed(f, lam, 0.0)[0]
    phipi = phi_closed(f, lam, math.pi)[0]
    return integral + evaluate_derivative(f, lam) * phi0**2 + evaluate_derivative(F, lam) * phipi**2


def beta_closed(f, F, lam):
    p0, dp0 = phi_closed(f, lam, 0.0)
    s0, ds0 = psi_closed(F, lam, 0.0)
    return s0 / p0 if abs(p0) > abs(dp0) / max(1.0, math.sqrt(abs(lam))) else ds0 / dp0


def random_hn(rng, ind, spread=3.0):
    """Random valid f of the given index with well-separated poles."""
    h0 = float(rng.uniform(0.5, 2.0)) if ind % 2 else 0.0
    d = ind // 2
    while True:
        hk = np.sort(rng.uniform(-spread, spread, d))
        if d < 2 or np.min(np.diff(hk)) > 0.3:
            break
    poles = tuple((float(x), float(rng.uniform(0.3, 2.0))) for x in hk)
    return RationalHNFunction(h0, float(rng.uniform(-1.0, 1.0)), poles)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
