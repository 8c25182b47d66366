"""Schroedinger operators -d^2/dx^2 + q on (0, inf) with short-range q.

Jost solutions are integrated backwards from a cutoff x_max beyond which q
is treated as zero.  Boundary conditions at 0 read
sin(alpha) f'(0) + cos(alpha) f(0) = 0.  The shift lambda1 > 0 moves the
essential spectrum to [lambda1, inf); shifted quantities are evaluated at
z - lambda1.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .coeff_lang import CoeffExpr, DomainError, as_expr
from .ode_engine import DEFAULT_CONFIG, IntegrationError, IntegratorConfig, integrate_linear
from .sl_core import ValidationError, _number, read_problem_file
from .zeta import (DEFAULT_ZETA, ZetaConfig, ZetaResult, ZeroModeError, _CutIntegral, _fit_order,
                   _SmallZ, _Term)

TAIL_TOL = 1e-10


class TailBoundError(ValidationError):
    """The potential is not negligible beyond x_max."""


@dataclass(frozen=True)
class HalfLineProblem:
    """q on (0, inf), numerically supported in [0, x_max].

    ``decay`` declares how q behaves beyond the sampled range: ``"compact"``
    (q = 0 for x > x_max) or ``"exponential"`` with ``rate`` (|q| <= C e^{-rate x}).
    """

    q: CoeffExpr
    x_max: float | None = None
    lambda1: float = 1.0
    decay: str = "compact"
    rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", as_expr(self.q))
        if not self.lambda1 > 0:
            raise ValidationError("lambda1 must be positive")
        if self.decay not in ("compact", "exponential"):
            raise ValidationError(f"unknown decay class {self.decay!r}")
        if self.decay == "compact":
            if self.x_max is None and not self.q.is_zero():
                raise ValidationError("compactly supported q needs x_max (end of its support)")
            if self.x_max is None:
                object.__setattr__(self, "x_max", 1.0)
        else:
            if not self.rate or self.rate <= 0:
                raise ValidationError("exponential decay needs a positive rate")
            if self.x_max is None:
                object.__setattr__(self, "x_max", self._default_cutoff())
        object.__setattr__(self, "x_max", float(self.x_max))
        if not self.x_max > 0:
            raise ValidationError("x_max must be positive")

    def _amplitude(self) -> float:
        xs = np.linspace(0.0, 40.0 / self.rate, 2001)
        return float(np.max(np.abs(self.q.vectorized(xs)) * np.exp(self.rate * xs)))

    def tail_bound(self, X: float | None = None) -> float:
        """Bound on int_X^inf (1 + x)|q|."""
        X = self.x_max if X is None else X
        if self.decay == "compact":
            return 0.0
        k = self.rate
        return self._amplitude() * math.exp(-k * X) * ((1 + X) / k + 1 / k**2)

    def _default_cutoff(self) -> float:
        X = 1.0
        while self.tail_bound(X) >= TAIL_TOL:
            X *= 1.25
            if X > 1e4:
                raise TailBoundError("could not find a cutoff with tail bound below 1e-10")
        return X

    def short_range_integral(self) -> float:
        """int_0^{x_max} (1 + x)|q(x)| dx."""
        val, _ = quad(lambda x: (1 + x) * abs(self.q(x)), 0.0, self.x_max, limit=200)
        return val

    def validate(self):
        if not math.isfinite(self.short_range_integral()):
            raise ValidationError("int (1+x)|q| is not finite")
        if self.tail_bound() >= TAIL_TOL:
            raise TailBoundError(f"tail bound {self.tail_bound():.3g} exceeds {TAIL_TOL}")

    def to_dict(self) -> dict:
        return {"q": str(self.q), "x_max": self.x_max, "lambda1": self.lambda1, "decay": self.decay,
                "rate": self.rate}


@dataclass
class JostData:
    z: complex
    f0: complex
    f0p: complex
    dot_f0: complex | None = None
    dot_f0p: complex | None = None
    est_error: float = 0.0


def _k_of(z) -> np.ndarray:
    k = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(k.imag < 0, -k, k)


def jost_batch(prob: HalfLineProblem, zs, cfg: IntegratorConfig | None = None,
               variational: bool = True, x_eval=None):
    """Jost boundary values for many z; optionally f(z, x) on ``x_eval``.

    Integrates u = e^{-ikx} f, which is constant where q vanishes and obeys
    u'' + 2ik u' = q u.  Backwards in x the homogeneous mode e^{-2ikx} is
    damped, so no oscillation has to be tracked at large |z|.
    """
    cfg = cfg or DEFAULT_CONFIG
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    k = _k_of(zs)
    if variational and np.any(k == 0):
        raise ValueError("z-derivatives of the Jost solution are singular at z = 0")
    X = prob.x_max
    if prob.q.is_zero():
        ones = np.ones_like(zs)
        out = [ones, 1j * k]
        out += [np.zeros_like(zs), 0.5j / k] if variational else [None, None]
        prof = None if x_eval is None else np.exp(1j * np.outer(np.asarray(x_eval, float), k))
        return out + [np.zeros(len(zs)), prof]
    m = 2 if variational else 1
    y0 = np.zeros((2 * m, len(zs)), dtype=complex)
    y0[0] = 1.0
    q = prob.q
    two_ik = 2j * k
    if variational:
        i_over_k = 1j / k

    def rhs(x, y):
        try:
            qx = q(x)
        except DomainError as exc:
            raise IntegrationError(f"potential domain error at x={x!r}: {exc}") from None
        U, V = y[:m], y[m:]
        out = np.empty_like(y)
        out[:m] = V
        out[m:] = qx * U - two_ik * V
        if variational:
            # d/dz of 2ik is i/k
            out[m + 1] -= i_over_k * V[0]
        return out

    h0 = X / max(8.0, 4.0 * float(np.max(np.abs(k))) * X)
    y, est, _, saved = integrate_linear(rhs, X, 0.0, y0, cfg, h0=h0, x_eval=x_eval)
    f0, f0p = y[0], y[m] + 1j * k * y[0]
    if variational:
        dot_f0 = y[1]
        dot_f0p = y[m + 1] + 1j * k * y[1] + 0.5j / k * y[0]
    else:
        dot_f0 = dot_f0p = None
    prof = None
    if x_eval is not None:
        xe = np.asarray(x_eval, dtype=float)[:, None]
        prof = saved[:, 0, :] * np.exp(1j * k * xe)
    return [f0, f0p, dot_f0, dot_f0p, est, prof]


def jost(prob: HalfLineProblem, z: complex, cfg: IntegratorConfig | None = None) -> JostData:
    """f_+(z, 0), f_+'(z, 0) and their z-derivatives."""
    f0, f0p, d0, d0p, est, _ = jost_batch(prob, [z], cfg)
    return JostData(complex(z), complex(f0[0]), complex(f0p[0]), complex(d0[0]), complex(d0p[0]),
                    float(est[0]))


def jost_profile(prob: HalfLineProblem, z: complex, xs, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """f_+(z, x) at the points ``xs`` (inside [0, x_max])."""
    return jost_batch(prob, [z], cfg, variational=False, x_eval=xs)[5][:, 0]


# -- Volterra oracle ------------------------------------------------------------------

def _volterra_grid(prob: HalfLineProblem, z: complex, n: int, tol: float = 1e-15, max_iter: int = 500):
    k = complex(_k_of(z))
    X = prob.x_max
    x = np.linspace(0.0, X, n)
    w = np.full(n, X / (n - 1))
    w[0] = w[-1] = 0.5 * X / (n - 1)
    qv = prob.q.vectorized(x)
    diff = x[:, None] - x[None, :]
    mask = np.triu(np.ones((n, n), dtype=bool))
    ker = np.where(mask, np.sinc(k * diff / math.pi) * diff, 0.0) * (w * qv)[None, :]
    f_free = np.exp(1j * k * x)
    f = f_free.copy()
    for _ in range(max_iter):
        new = f_free - ker @ f
        if np.max(np.abs(new - f)) <= tol * np.max(np.abs(new)):
            f = new
            break
        f = new
    else:
        raise ArithmeticError("Volterra iteration did not converge")
    fp0 = 1j * k - np.sum(w * np.cos(k * (0.0 - x)) * qv * f)
    return f[0], fp0


def volterra_jost(prob: HalfLineProblem, z: complex, n: int = 1025) -> tuple[complex, complex]:
    """f_+(z, 0), f_+'(z, 0) by fixed-point iteration of the Volterra equation.

    Trapezoid rule on two grids with Richardson extrapolation.  Meant for
    moderate |z| and compactly supported q.
    """
    a0, a1 = _volterra_grid(prob, z, n)
    b0, b1 = _volterra_grid(prob, z, 2 * n - 1)
    return (4 * b0 - a0) / 3, (4 * b1 - a1) / 3


# -- boundary combinations ----------------------------------------------------------------

def _bc_value(alpha: float, f0, f0p):
    return math.sin(alpha) * f0p + math.cos(alpha) * f0


def boundary_value(prob: HalfLineProblem, alpha: float, z: complex, cfg=None) -> tuple[complex, complex]:
    """sin(alpha) f'(z, 0) + cos(alpha) f(z, 0) and its z-derivative (unshifted z)."""
    f0, f0p, d0, d0p, _, _ = jost_batch(prob, [z], cfg)
    return complex(_bc_value(alpha, f0, f0p)[0]), complex(_bc_value(alpha, d0, d0p)[0])


def perturbation_det(prob1: HalfLineProblem, prob2: HalfLineProblem, alpha: float, z: complex,
                     cfg: IntegratorConfig | None = None) -> complex:
    """Ratio of boundary combinations of the Jost functions at z - lambda1."""
    lam = _shared_shift(prob1, prob2)
    if prob1 == prob2:
        return 1.0 + 0j
    num, _ = boundary_value(prob2, alpha, z - lam, cfg)
    den, _ = boundary_value(prob1, alpha, z - lam, cfg)
    if abs(den) < 1e-13 * max(1.0, abs(num)):
        raise ZeroDivisionError(f"z - lambda1 = {z - lam} is an eigenvalue of the first operator")
    return num / den


def perturbation_trace(prob1: HalfLineProblem, prob2: HalfLineProblem, alpha: float, z: complex,
                       cfg: IntegratorConfig | None = None) -> complex:
    """-d/dz ln perturbation_det: tr of the resolvent difference (second minus first)."""
    lam = _shared_shift(prob1, prob2)
    n2, d2 = boundary_value(prob2, alpha, z - lam, cfg)
    n1, d1 = boundary_value(prob1, alpha, z - lam, cfg)
    return -(d2 / n2 - d1 / n1)


def _shared_shift(p1: HalfLineProblem, p2: HalfLineProblem) -> float:
    if p1.lambda1 != p2.lambda1:
        raise ValidationError("both problems must use the same lambda1")
    return p1.lambda1


def m_function(prob: HalfLineProblem, alpha: float, z: complex, cfg=None) -> complex:
    """Weyl-Titchmarsh m-function m_{+,alpha}(z) (unshifted z)."""
    f0, f0p, _, _, _, _ = jost_batch(prob, [z], cfg, variational=False)
    f0, f0p = complex(f0[0]), complex(f0p[0])
    if f0 == 0:
        raise ZeroDivisionError("f_+(z, 0) = 0")
    m0 = f0p / f0
    ca, sa = math.cos(alpha), math.sin(alpha)
    den = ca + sa * m0
    if den == 0:
        raise ZeroDivisionError(f"z={z} is an eigenvalue for alpha={alpha}")
    return (-sa + ca * m0) / den


def bc_trace_diff(prob: HalfLineProblem, alpha1: float, alpha2: float, z: complex, cfg=None) -> complex:
    """tr[(H_alpha2 - z)^{-1} - (H_alpha1 - z)^{-1}] for the shifted operators."""
    if alpha1 == alpha2:
        return 0j
    w = z - prob.lambda1
    g2, d2 = boundary_value(prob, alpha2, w, cfg)
    g1, d1 = boundary_value(prob, alpha1, w, cfg)
    if min(abs(g1), abs(g2)) < 1e-13:
        raise ZeroDivisionError(f"z={z} is (numerically) an eigenvalue")
    return -(d2 / g2 - d1 / g1)


def krein_trace_diff(prob: HalfLineProblem, alpha1: float, alpha2: float, z: complex,
                     cfg=None, h: float = 1e-4) -> complex:
    """Same trace from -d/dz ln[cot(alpha2 - alpha1) + m_{+,alpha1}(z)] (numerical z-derivative)."""
    w = z - prob.lambda1
    cot = 1.0 / math.tan(alpha2 - alpha1)

    def ln_term(v):
        return cmath.log(cot + m_function(prob, alpha1, v, cfg))

    # fourth-order central difference
    d = (-ln_term(w + 2 * h) + 8 * ln_term(w + h) - 8 * ln_term(w - h) + ln_term(w - 2 * h)) / (12 * h)
    return -d


# -- Green's function oracle ----------------------------------------------------------------

def green_trace_oracle(prob1: HalfLineProblem, prob2: HalfLineProblem, alpha: float, z: complex,
                       nodes: int = 400) -> complex:
    """int_0^inf [G_2(w, x, x) - G_1(w, x, x)] dx with w = z - lambda1.

    Regular and Jost solutions come from scipy's solve_ivp; beyond the
    common cutoff the diagonal difference is integrated in closed form.
    """
    lam = _shared_shift(prob1, prob2)
    w = complex(z - lam)
    k = complex(_k_of(w))
    X = max(prob1.x_max, prob2.x_max)
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    xs = 0.5 * X * (xg + 1)
    total = 0j
    tails = []
    for sign, prob in ((1, prob2), (-1, prob1)):
        def ode(x, y, prob=prob):
            return [y[1], (prob.q(x) if x <= prob.x_max else 0.0) * y[0] - w * y[0]]
        ca, sa = math.cos(alpha), math.sin(alpha)
        reg = solve_ivp(ode, (0.0, X), [-sa + 0j, ca + 0j], method="DOP853", rtol=1e-12, atol=1e-14,
                        dense_output=True)
        jo = solve_ivp(ode, (X, 0.0), [cmath.exp(1j * k * X), 1j * k * cmath.exp(1j * k * X)],
                       method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        phi, f = reg.sol(xs)[0], jo.sol(xs)[0]
        phiX, phipX = reg.sol(X)
        fX, fpX = jo.sol(X)
        W = fX * phipX - fpX * phiX
        total += sign * 0.5 * X * np.sum(wg * phi * f) / W
        # beyond X: phi = a e^{ikx} + b e^{-ikx}, f = e^{ikx}
        ex = cmath.exp(1j * k * X)
        a = 0.5 * (phiX + phipX / (1j * k)) / ex
        b = 0.5 * (phiX - phipX / (1j * k)) * ex
        # G(x, x) = (a e^{2ikx} + b) / W, W = -2ik b
        tails.append(sign * (a * (-cmath.exp(2j * k * X) / (2j * k))) / W)
    # the constant b/W = -1/(2ik) parts cancel between the two operators
    return total + sum(tails)


# -- bound states and zeta ---------------------------------------------------------------------

def bound_states(prob: HalfLineProblem, alpha: float, cfg=None, n_grid: int = 400) -> list[float]:
    """Eigenvalues E < 0 of -d^2/dx^2 + q with the alpha condition (unshifted)."""
    xs = np.linspace(0.0, prob.x_max, 401)
    qmin = float(np.min(prob.q.vectorized(xs)))
    cot = 0.0 if alpha == 0 else math.cos(alpha) / math.sin(alpha)
    kap_max = math.sqrt(max(0.0, -qmin)) + max(0.0, cot) + 1.0
    kaps = np.linspace(kap_max, 1e-6 * kap_max, n_grid)
    Es = -kaps**2

    def G(E):
        f0, f0p, _, _, _, _ = jost_batch(prob, np.atleast_1d(E), cfg, variational=False)
        return (_bc_value(alpha, f0, f0p)).real

    vals = G(Es)
    roots = []
    for i in range(len(Es) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            roots.append(brentq(lambda e: float(G(e)[0]), Es[i], Es[i + 1], xtol=1e-14, rtol=1e-14))
    return sorted(roots)


def _halfline_term(prob: HalfLineProblem, alpha: float, weight: float, cfg: ZetaConfig) -> _Term:
    lam = prob.lambda1

    def values(zs):
        f0, f0p, _, _, _, _ = jost_batch(prob, zs - lam, cfg.integrator, variational=False)
        return _bc_value(alpha, f0, f0p)

    def dlog(zs):
        f0, f0p, d0, d0p, _, _ = jost_batch(prob, zs - lam, cfg.integrator)
        return _bc_value(alpha, d0, d0p) / _bc_value(alpha, f0, f0p)

    # z - lambda1 has a branch point at z = lambda1; stay well inside
    small = _SmallZ(values, 0.5 * lam)
    m, _ = _fit_order(values, small, cfg.theta)
    kappa = 0.0 if alpha == 0 else 1.0
    return _Term(weight, m, small, dlog, kappa / 2 - m, 0j, kappa)


def _counts(prob: HalfLineProblem, alpha: float, cfg) -> tuple[int, int, list[float]]:
    """(negatives, zero modes) of the shifted operator, plus the bound states."""
    E = bound_states(prob, alpha, cfg.integrator)
    shifted = [e + prob.lambda1 for e in E]
    zero = sum(1 for v in shifted if abs(v) <= 1e-7 * max(1.0, prob.lambda1))
    neg = sum(1 for v in shifted if v < 0 and abs(v) > 1e-7 * max(1.0, prob.lambda1))
    return neg, zero, E


def flat_robin_zeta_prime0(lambda1: float, alpha2: float) -> float:
    """Closed form for the q = 0 pair (Dirichlet, Robin alpha2)."""
    return -math.log(abs(math.sqrt(lambda1) - math.cos(alpha2) / math.sin(alpha2)))


@dataclass
class HalfLineResult(ZetaResult):
    pieces: dict = field(default_factory=dict)


def _pair_pipeline(p1, a1, p2, a2, cfg):
    terms = [_halfline_term(p1, a1, -1.0, cfg), _halfline_term(p2, a2, 1.0, cfg)]
    value, diag = _CutIntegral(terms, cfg).prime0()
    return value, terms, diag


def _same_condition_piece(p1, p2, alpha, cfg) -> tuple[float, int]:
    """Real part of zeta'(0) for (p1, p2) with one condition; also the zero-mode order of p2 vs p1."""
    if p1 == p2:
        t = _halfline_term(p2, alpha, 1.0, cfg)
        return 0.0, t.m
    value, terms, _ = _pair_pipeline(p1, alpha, p2, alpha, cfg)
    # which operator is the non-flat one decides which order is reported
    return value.real, terms[1].m if p1.q.is_zero() else terms[0].m


def halfline_relative_zeta_prime0(prob1: HalfLineProblem, prob2: HalfLineProblem, alpha1: float,
                                  alpha2: float, cfg: ZetaConfig = DEFAULT_ZETA,
                                  method: str = "auto") -> HalfLineResult:
    """zeta'(0; H1(lambda1), H2(lambda1)) for half-line operators.

    With exactly one Dirichlet condition the default splits the pair into
    two same-condition pairs and the flat Dirichlet/Robin pair.  ``method =
    "direct"`` instead subtracts the mismatched large-t behaviour in a single
    cut integral.
    """
    lam = _shared_shift(prob1, prob2)
    alpha1 = float(alpha1) % math.pi
    alpha2 = float(alpha2) % math.pi
    n1, z1, E1 = _counts(prob1, alpha1, cfg)
    n2, z2, E2 = _counts(prob2, alpha2, cfg)
    im = math.pi * (n2 - n1)
    diag = {"lambda1": lam, "theta": cfg.theta, "bound_states": [E1, E2], "provenance": cfg.to_dict()}
    if prob1 == prob2 and alpha1 == alpha2:
        return HalfLineResult(0j, 0.0, 0.0, (z1, z2), (n1, n2), diag)
    one_dirichlet = (alpha1 == 0.0) != (alpha2 == 0.0)
    pieces = {}
    if one_dirichlet and method == "auto":
        sign = 1.0
        if alpha2 == 0.0:
            # reverse the pair so that the Dirichlet operator comes first
            prob1, prob2, alpha1, alpha2, sign = prob2, prob1, alpha2, alpha1, -1.0
        flat = HalfLineProblem(as_expr("0"), lambda1=lam)
        v1, m_robin = _same_condition_piece(flat, prob2, alpha2, cfg)
        v2, m_dir = _same_condition_piece(prob1, flat, 0.0, cfg)
        v3 = flat_robin_zeta_prime0(lam, alpha2)
        re = sign * (v1 + v2 + v3)
        pieces = {"robin_pair": v1, "dirichlet_pair": v2, "flat_pair": v3}
        ms = (m_dir, m_robin) if sign > 0 else (m_robin, m_dir)
        diag.update(method="three-term")
    else:
        value, terms, d = _pair_pipeline(prob1, alpha1, prob2, alpha2, cfg)
        re = value.real
        ms = (terms[0].m, terms[1].m)
        diag.update(d, method="direct", pipeline_imag=value.imag)
    if ms != (z1, z2):
        raise ZeroModeError(f"zero-mode orders {ms} disagree with bound-state counts {(z1, z2)}")
    return HalfLineResult(complex(re, im), re, im, (z1, z2), (n1, n2), diag, pieces)


# -- problem files ------------------------------------------------------------------------------

def halfline_from_dict(data: dict) -> tuple[HalfLineProblem, float, float | None]:
    """Build a half-line problem and its angle(s) from a parsed problem file."""
    if not data.get("halfline", False):
        raise ValidationError("not a half-line problem file (missing 'halfline = true')")
    rate = data.get("rate")
    prob = HalfLineProblem(as_expr(data.get("q", "0")),
                           None if "x_max" not in data else _number(data["x_max"], "x_max"),
                           _number(data.get("lambda1", 1.0), "lambda1"),
                           str(data.get("decay", "compact")),
                           None if rate is None else _number(rate, "rate"))
    if "alpha" in data:
        return prob, _number(data["alpha"], "alpha"), None
    a1 = _number(data.get("alpha1", 0.0), "alpha1")
    a2 = None if "alpha2" not in data else _number(data["alpha2"], "alpha2")
    return prob, a1, a2


def load_halfline(path) -> tuple[HalfLineProblem, float, float | None]:
    return halfline_from_dict(read_problem_file(path))
