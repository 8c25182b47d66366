"""Characteristic functions whose zeros are the eigenvalues.

For separated conditions

    F = cos(a)[-sin(b) phi^[1](b) + cos(b) phi(b)] - sin(a)[-sin(b) theta^[1](b) + cos(b) theta(b)]

and for coupled conditions (g(b), g^[1](b)) = e^{i phase} R (g(a), g^[1](a))

    F = 1 + e^{2 i phase} - e^{i phase}[R22 theta + R11 phi^[1] - R21 phi - R12 theta^[1]](b).

Values may carry an exponential scale: the true value is ``F * exp(log_scale)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .ode_engine import (FundamentalBatch, IntegratorConfig, integrate_batch, liouville_length)
from .sl_core import BoundaryCondition, Coupled, Krein, SLProblem, Separated, resolve_bc


class NearSpectrumError(ArithmeticError):
    """The spectral parameter is (numerically) an eigenvalue."""


@dataclass
class CharValue:
    z: complex
    F: complex
    dF: complex | None
    kind: str
    log_scale: float = 0.0
    est_error: float = 0.0

    @property
    def value(self) -> complex:
        return self.F * math.exp(self.log_scale) if self.log_scale else self.F

    @property
    def derivative(self) -> complex | None:
        if self.dF is None:
            return None
        return self.dF * math.exp(self.log_scale) if self.log_scale else self.dF

    def log_value(self) -> complex:
        return cmath.log(self.F) + self.log_scale

    def dlog(self) -> complex:
        return self.dF / self.F


@dataclass
class CharBatch:
    z: np.ndarray
    F: np.ndarray
    dF: np.ndarray | None
    kind: str
    log_scale: np.ndarray
    est_error: np.ndarray

    def item(self, i: int) -> CharValue:
        dF = None if self.dF is None else complex(self.dF[i])
        return CharValue(complex(self.z[i]), complex(self.F[i]), dF, self.kind,
                         float(self.log_scale[i]), float(self.est_error[i]))

    def log_values(self) -> np.ndarray:
        return np.log(self.F) + self.log_scale

    def dlog(self) -> np.ndarray:
        return self.dF / self.F


# -- assembly from fundamental data ------------------------------------------------

def _separated(fd: FundamentalBatch, alpha: float, beta: float, variational: bool):
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)

    def combo(th, thq, ph, phq):
        return ca * (-sb * phq + cb * ph) - sa * (-sb * thq + cb * th)

    F = combo(fd.theta, fd.theta_q, fd.phi, fd.phi_q)
    dF = combo(fd.dot_theta, fd.dot_theta_q, fd.dot_phi, fd.dot_phi_q) if variational else None
    return F, dF


def _coupled(fd: FundamentalBatch, phase: float, R: np.ndarray, variational: bool):
    e = cmath.exp(1j * phase)

    def lin(th, thq, ph, phq):
        return R[1, 1] * th + R[0, 0] * phq - R[1, 0] * ph - R[0, 1] * thq

    with np.errstate(under="ignore"):
        const = (1 + e * e) * np.exp(-fd.log_scale)
    F = const - e * lin(fd.theta, fd.theta_q, fd.phi, fd.phi_q)
    dF = -e * lin(fd.dot_theta, fd.dot_theta_q, fd.dot_phi, fd.dot_phi_q) if variational else None
    return F, dF


def assemble(fd: FundamentalBatch, bc: Separated | Coupled, variational: bool = True):
    if isinstance(bc, Separated):
        return _separated(fd, bc.alpha, bc.beta, variational)
    return _coupled(fd, bc.phase, bc.matrix, variational)


def char_batch(prob: SLProblem, bc: BoundaryCondition, zs, cfg: IntegratorConfig | None = None,
               derivative: bool = True) -> CharBatch:
    """Characteristic function (and z-derivative) for an array of z."""
    bc = resolve_bc(prob, bc, cfg)
    fd = integrate_batch(prob, zs, cfg, variational=derivative)
    F, dF = assemble(fd, bc, derivative)
    return CharBatch(fd.z, F, dF, bc.kind, fd.log_scale, fd.est_error)


def characteristic(prob: SLProblem, bc: BoundaryCondition, z: complex,
                   cfg: IntegratorConfig | None = None, derivative: bool = True) -> CharValue:
    return char_batch(prob, bc, [z], cfg, derivative).item(0)


def char_separated(prob: SLProblem, alpha: float, beta: float, z: complex,
                   cfg: IntegratorConfig | None = None) -> CharValue:
    return characteristic(prob, Separated(alpha, beta), z, cfg)


def char_coupled(prob: SLProblem, phase: float, R, z: complex,
                 cfg: IntegratorConfig | None = None) -> CharValue:
    return characteristic(prob, Coupled(phase, R), z, cfg)


def floquet_discriminant(prob: SLProblem, z: complex, cfg: IntegratorConfig | None = None) -> complex:
    """Half the trace of the monodromy matrix."""
    fd = integrate_batch(prob, [z], cfg, variational=False).item(0)
    th, _, _, phq = fd.values()
    return 0.5 * (th + phq)


def krein_D(prob: SLProblem, z: complex, cfg: IntegratorConfig | None = None) -> complex:
    """D_K(z); the Krein characteristic function is -2 (D_K(z) - 1)."""
    cv = characteristic(prob, Krein(), z, cfg, derivative=False)
    return 1.0 - 0.5 * cv.value


def krein_c(prob: SLProblem, cfg: IntegratorConfig | None = None, cross_check: bool = True) -> float:
    """Leading coefficient c in D_K(z) - 1 = c z^2 + O(z^3).

    Computed as half the Wronskian of the z-derivatives of phi and theta at
    z=0.  For q identically zero it is compared with the nested-integral
    closed form.
    """
    fd = integrate_batch(prob, [0.0], cfg, variational=True).item(0)
    c = 0.5 * (fd.dot_phi * fd.dot_theta_q - fd.dot_phi_q * fd.dot_theta).real
    if cross_check and prob.q.is_zero():
        ref = krein_c_nested(prob)
        if abs(c - ref) > 1e-6 * abs(ref):
            raise ArithmeticError(f"Krein coefficient mismatch: variational {c!r}, nested {ref!r}")
    return c


def krein_c_nested(prob: SLProblem, n: int = 4001) -> float:
    """Nested-integral expression for c when q = 0 (independent of the ODE solver)."""
    x = np.linspace(prob.a, prob.b, n)
    inv_p = 1.0 / prob.p.vectorized(x)
    r = prob.r.vectorized(x)

    def cum(f):
        return cumulative_simpson(f, x=x, initial=0.0)

    P = cum(inv_p)                       # int_a^x 1/p
    Rr = cum(r)                          # int_a^x r
    triple = cum(cum(r * P) * inv_p)[-1]  # int dw/p(w) int^w dv r(v) int^v du/p(u)
    second = cum(Rr * inv_p)[-1]         # int dv/p(v) int^v r
    third = cum(r * P)[-1]               # int dw r(w) int^w dt/p(t)
    return 0.5 * (Rr[-1] * triple - second * third)


# -- large-|z| asymptotics -----------------------------------------------------------

@dataclass(frozen=True)
class Asymptotics:
    """F(z) ~ C w^kappa exp(w c) with w = -i z^{1/2}, Im z^{1/2} >= 0."""

    C: complex
    kappa: int
    c: float

    def log_value(self, z) -> np.ndarray:
        w = -1j * sqrt_upper(z)
        return np.log(complex(self.C)) + self.kappa * np.log(w) + w * self.c

    def dlog(self, z) -> np.ndarray:
        """d/dz log of the asymptotic form."""
        k = sqrt_upper(z)
        return self.kappa / (2 * np.asarray(z, dtype=complex)) - 0.5j * self.c / k


def sqrt_upper(z):
    """Branch of z^{1/2} with non-negative imaginary part."""
    k = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(k.imag < 0, -k, k)


def asymptotics(prob: SLProblem, bc: BoundaryCondition, cfg=None) -> Asymptotics:
    bc = resolve_bc(prob, bc, cfg)
    mu_a = (prob.p(prob.a) * prob.r(prob.a)) ** 0.25
    mu_b = (prob.p(prob.b) * prob.r(prob.b)) ** 0.25
    c = liouville_length(prob)
    if isinstance(bc, Separated):
        sa, sb = math.sin(bc.alpha), math.sin(bc.beta)
        if bc.alpha == 0.0 and bc.beta == 0.0:
            return Asymptotics(1.0 / (2 * mu_a * mu_b), -1, c)
        if bc.alpha == 0.0:
            return Asymptotics(-sb * mu_b / (2 * mu_a), 0, c)
        if bc.beta == 0.0:
            return Asymptotics(-sa * mu_a / (2 * mu_b), 0, c)
        return Asymptotics(sa * sb * mu_a * mu_b / 2, 1, c)
    e = cmath.exp(1j * bc.phase)
    R = bc.matrix
    if abs(R[0, 1]) > 1e-14 * np.max(np.abs(R)):
        return Asymptotics(e * R[0, 1] * mu_a * mu_b / 2, 1, c)
    return Asymptotics(-e * (R[1, 1] * mu_a / mu_b + R[0, 0] * mu_b / mu_a) / 2, 0, c)


# -- Weyl-solution form of the resolvent trace -----------------------------------------------

def weyl_trace_check(prob: SLProblem, alpha: float, beta: float, z: complex,
                     cfg: IntegratorConfig | None = None, use_minus_form: bool = False) -> complex:
    """tr (H - z)^{-1} from the Weyl solutions psi_-, psi_+ (separated conditions).

    ``use_minus_form`` selects the psi_- expression in the Dirichlet-Dirichlet
    case; otherwise the psi_+ expression is used.
    """
    bc = Separated(alpha, beta)
    fd = integrate_batch(prob, [z], cfg, variational=True).item(0)
    ca, sa = math.cos(bc.alpha), math.sin(bc.alpha)
    cb, sb = math.cos(bc.beta), math.sin(bc.beta)
    th, thq, ph, phq = fd.theta, fd.theta_q, fd.phi, fd.phi_q
    dth, dthq, dph, dphq = fd.dot_theta, fd.dot_theta_q, fd.dot_phi, fd.dot_phi_q

    # psi_+ = P phi + Q theta, fixed by the boundary condition at b
    P, dP = -sb * thq + cb * th, -sb * dthq + cb * dth
    Q, dQ = sb * phq - cb * ph, sb * dphq - cb * dph
    plus_a, dplus_a = Q, dQ
    plus_qa, dplus_qa = P, dP
    plus_b, dplus_b = P * ph + Q * th, dP * ph + P * dph + dQ * th + Q * dth
    plus_qb, dplus_qb = P * phq + Q * thq, dP * phq + P * dphq + dQ * thq + Q * dthq
    # psi_- = cos(a) phi - sin(a) theta, fixed at a
    minus_a, minus_qa = -sa, ca
    minus_b, dminus_b = ca * ph - sa * th, ca * dph - sa * dth
    minus_qb, dminus_qb = ca * phq - sa * thq, ca * dphq - sa * dthq

    def dlog(val, dval):
        if abs(val) < 1e-300:
            raise NearSpectrumError(f"Weyl-solution denominator vanishes at z={z}")
        return dval / val

    if bc.alpha == 0.0 and bc.beta == 0.0:
        if use_minus_form:
            # psi_-^[1](a) = 1 does not depend on z
            return -dlog(minus_b, dminus_b)
        return -(dlog(plus_a, dplus_a) - dlog(plus_qb, dplus_qb))
    if bc.alpha == 0.0:
        return -(dlog(plus_a, dplus_a) - dlog(plus_b, dplus_b))
    if bc.beta == 0.0:
        # psi_-(a) = -sin(alpha) is constant
        return -dlog(minus_b, dminus_b)
    W = plus_a * minus_qa - plus_qa * minus_a
    dW = dplus_a * minus_qa - dplus_qa * minus_a
    scale = max(abs(plus_a), abs(plus_qa), 1e-300)
    if abs(W) < 1e-13 * scale:
        raise NearSpectrumError(f"Wronskian of Weyl solutions vanishes at z={z}")
    # psi_-(a) is constant; keep psi_+(b) which is a Wronskian-type constant too
    return -(dW / W - dlog(plus_b, dplus_b))
