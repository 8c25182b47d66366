"""Fundamental system, quasi-derivatives and z-derivatives across [a, b].

All spectral parameters of a batch are advanced together with a shared
adaptive step (Dormand-Prince 8(5,3) tableau), so coefficient evaluations are
paid once per stage for the whole batch.  For spectral parameters with large
|Im sqrt(z)| the solutions grow like exp(|Im sqrt z| * int sqrt(r/p)); that
factor is divided out during integration and returned separately as
``log_scale``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import DOP853, quad

from .coeff_lang import DomainError
from .sl_core import SLProblem

_A = DOP853.A
_B = DOP853.B
_C = DOP853.C
_E3 = DOP853.E3
_E5 = DOP853.E5
_NS = DOP853.n_stages

# growth exponents below this are left unscaled so that moderate-z data are
# plain values
SCALE_THRESHOLD = 30.0


class IntegrationError(RuntimeError):
    """Step budget exceeded or a coefficient failed to evaluate."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


DEFAULT_CONFIG = IntegratorConfig()


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("SPECDET_THREADS", "1")))
    except ValueError:
        return 1


# -- generic batched linear integrator ----------------------------------------

def integrate_linear(rhs: Callable[[float, np.ndarray], np.ndarray], x0: float, x1: float,
                     y0: np.ndarray, cfg: IntegratorConfig, h0: float | None = None,
                     x_eval: np.ndarray | None = None):
    """Integrate y' = rhs(x, y) from x0 to x1 (either direction).

    ``y0`` has shape (..., N); the last axis indexes independent members and
    error control uses the worst member.  Returns the final state, the
    accumulated per-member local-error estimate, the step count and, when
    ``x_eval`` is given, the states at those abscissae (shape (len, ..., N)).
    """
    direction = 1.0 if x1 >= x0 else -1.0
    span = abs(x1 - x0)
    y = np.array(y0, dtype=complex)
    nmem = y.shape[-1]
    red_axes = tuple(range(y.ndim - 1))
    est = np.zeros(nmem)
    x = x0
    h = min(span, h0 if h0 else span / 20.0)
    K = np.empty((_NS + 1,) + y.shape, dtype=complex)
    K2 = K.reshape(_NS + 1, -1)
    shape = y.shape
    steps = 0
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    if x_eval is not None:
        x_eval = np.asarray(x_eval, dtype=float)
        order = np.argsort(direction * x_eval)
        targets = list(x_eval[order])
        saved = np.empty((len(x_eval),) + y.shape, dtype=complex)
        k_out = 0
        while k_out < len(targets) and direction * (targets[k_out] - x0) <= 0:
            saved[order[k_out]] = y
            k_out += 1
    f = rhs(x, y)
    while direction * (x1 - x) > 1e-14 * max(1.0, abs(x1)):
        if steps >= cfg.max_steps:
            raise IntegrationError(f"step budget {cfg.max_steps} exceeded")
        h = min(h, abs(x1 - x))
        if x_eval is not None and k_out < len(targets):
            h = min(h, abs(targets[k_out] - x)) or h
        hd = direction * h
        K[0] = f
        for s in range(1, _NS):
            dy = (_A[s, :s] @ K2[:s]).reshape(shape)
            K[s] = rhs(x + _C[s] * hd, y + hd * dy)
        y_new = y + hd * (_B @ K2[:_NS]).reshape(shape)
        f_new = rhs(x + hd, y_new)
        K[_NS] = f_new
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        e5 = (_E5 @ K2).reshape(shape)
        e3 = (_E3 @ K2).reshape(shape)
        n5 = np.sum(np.abs(e5 / scale) ** 2, axis=red_axes)
        n3 = np.sum(np.abs(e3 / scale) ** 2, axis=red_axes)
        denom = n5 + 0.01 * n3
        ncomp = y[..., 0].size
        with np.errstate(invalid="ignore", divide="ignore"):
            err_m = np.where(denom > 0, h * n5 / np.sqrt(denom * ncomp), 0.0)
        err = float(np.max(err_m)) if nmem else 0.0
        if not math.isfinite(err):
            h *= 0.2
            if h < 1e-14 * span:
                raise IntegrationError("step size underflow (non-finite state)")
            continue
        if err <= 1.0:
            x += hd
            est += err_m * np.max(scale, axis=red_axes)
            y, f = y_new, f_new
            steps += 1
            if x_eval is not None:
                while k_out < len(targets) and direction * (targets[k_out] - x) <= 1e-14 * max(1.0, abs(x)):
                    saved[order[k_out]] = y
                    k_out += 1
            fac = 10.0 if err == 0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            h *= max(0.2, fac)
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
            if h < 1e-14 * span:
                raise IntegrationError("step size underflow")
    if x_eval is not None:
        while k_out < len(targets):
            saved[order[k_out]] = y
            k_out += 1
        return y, est, steps, saved
    return y, est, steps, None


# -- Sturm-Liouville fundamental system -----------------------------------------

@dataclass
class FundamentalData:
    """Values at x=b of theta, theta^[1], phi, phi^[1] (and z-derivatives).

    Stored values are mantissas: the true value is ``field * exp(log_scale)``.
    ``log_scale`` is zero unless the growth factor would be large.
    """

    z: complex
    theta: complex
    theta_q: complex
    phi: complex
    phi_q: complex
    dot_theta: complex | None = None
    dot_theta_q: complex | None = None
    dot_phi: complex | None = None
    dot_phi_q: complex | None = None
    est_error: float = 0.0
    log_scale: float = 0.0
    steps: int = 0

    def wronskian(self) -> complex:
        w = self.theta * self.phi_q - self.theta_q * self.phi
        return w * math.exp(2 * self.log_scale) if self.log_scale else w

    def values(self) -> tuple[complex, complex, complex, complex]:
        s = math.exp(self.log_scale)
        return self.theta * s, self.theta_q * s, self.phi * s, self.phi_q * s

    def dots(self) -> tuple[complex, complex, complex, complex]:
        s = math.exp(self.log_scale)
        return self.dot_theta * s, self.dot_theta_q * s, self.dot_phi * s, self.dot_phi_q * s


@dataclass
class FundamentalBatch:
    z: np.ndarray
    theta: np.ndarray
    theta_q: np.ndarray
    phi: np.ndarray
    phi_q: np.ndarray
    dot_theta: np.ndarray | None
    dot_theta_q: np.ndarray | None
    dot_phi: np.ndarray | None
    dot_phi_q: np.ndarray | None
    est_error: np.ndarray
    log_scale: np.ndarray
    steps: int = 0

    def __len__(self) -> int:
        return len(self.z)

    def item(self, i: int) -> FundamentalData:
        get = lambda arr: None if arr is None else complex(arr[i])  # noqa: E731
        return FundamentalData(complex(self.z[i]), complex(self.theta[i]), complex(self.theta_q[i]),
                               complex(self.phi[i]), complex(self.phi_q[i]), get(self.dot_theta),
                               get(self.dot_theta_q), get(self.dot_phi), get(self.dot_phi_q),
                               float(self.est_error[i]), float(self.log_scale[i]), self.steps)


class _Coefficients:
    """Scalar coefficient evaluation with constant short-cuts."""

    def __init__(self, prob: SLProblem):
        self.prob = prob
        self.const = all(e.is_constant for e in (prob.p, prob.q, prob.r))
        if self.const:
            self._cached = self._eval(prob.a)

    def _eval(self, x: float):
        pr = self.prob
        try:
            p, q, r = pr.p(x), pr.q(x), pr.r(x)
        except DomainError as exc:
            raise IntegrationError(f"coefficient domain error at x={x!r}: {exc}") from None
        if p == 0.0 or r / p < 0.0:
            raise IntegrationError(f"degenerate coefficients at x={x!r} (p={p}, r={r})")
        return p, q, r, math.sqrt(r / p)

    def __call__(self, x: float):
        return self._cached if self.const else self._eval(x)


@lru_cache(maxsize=256)
def _liouville_length_cached(prob: SLProblem) -> float:
    c = _Coefficients(prob)
    if c.const:
        return c(prob.a)[3] * prob.length
    val, _ = quad(lambda x: c(x)[3], prob.a, prob.b, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def liouville_length(prob: SLProblem) -> float:
    """int_a^b sqrt(r/p)."""
    return _liouville_length_cached(prob)


def growth_rates(prob: SLProblem, zs: np.ndarray) -> np.ndarray:
    """Per-z complex exponent w = -i z^{1/2} divided out during integration.

    Zero when the growth over the interval is mild.  Dividing out the
    whole dominant mode e^{w S(x)}, not just its modulus, leaves a slowly
    varying state, so no phase has to be tracked at large |z|.
    """
    k = np.sqrt(np.asarray(zs, dtype=complex))
    k = np.where(k.imag < 0, -k, k)
    c = liouville_length(prob)
    return np.where(k.imag * c > SCALE_THRESHOLD, -1j * k, 0.0)


def _solve_chunk(prob: SLProblem, zs: np.ndarray, cfg: IntegratorConfig, variational: bool):
    coef = _Coefficients(prob)
    n = len(zs)
    m = 4 if variational else 2
    g = growth_rates(prob, zs)
    # state rows: [values (m), quasi-derivatives (m)], plus one row for S(x)
    y0 = np.zeros((2 * m + 1, n), dtype=complex)
    y0[0] = 1.0          # theta
    y0[m + 1] = 1.0      # phi^[1]

    zr = zs.astype(complex)

    def rhs(x, y):
        p, q, r, s = coef(x)
        V, Q = y[:m], y[m:2 * m]
        out = np.empty_like(y)
        gs = g * s
        out[:m] = Q / p - gs * V
        pot = q - zr * r
        out[m:2 * m] = pot * V - gs * Q
        if variational:
            out[m + 2:2 * m] -= r * V[:2]
        out[2 * m] = s
        return out

    kmax = float(np.max(np.abs(np.sqrt(zr)))) if n else 0.0
    h0 = prob.length / max(8.0, 4.0 * kmax * liouville_length(prob))
    y, est, steps, _ = integrate_linear(rhs, prob.a, prob.b, y0, cfg, h0=h0)
    S = y[2 * m].real
    log_scale = g.real * S
    # the oscillating part of e^{wS} is restored exactly; only the modulus stays as a scale
    y[:2 * m] *= np.exp(1j * g.imag * S)
    dots = (y[2], y[m + 2], y[3], y[m + 3]) if variational else (None,) * 4
    return FundamentalBatch(zr, y[0], y[m], y[1], y[m + 1], dots[0], dots[1], dots[2], dots[3],
                            est, log_scale, steps)


def _concat(parts: list[FundamentalBatch]) -> FundamentalBatch:
    if len(parts) == 1:
        return parts[0]
    cat = lambda name: (None if getattr(parts[0], name) is None  # noqa: E731
                        else np.concatenate([getattr(p, name) for p in parts]))
    names = ("z", "theta", "theta_q", "phi", "phi_q", "dot_theta", "dot_theta_q", "dot_phi",
             "dot_phi_q", "est_error", "log_scale")
    return FundamentalBatch(*[cat(nm) for nm in names], steps=max(p.steps for p in parts))


def integrate_batch(prob: SLProblem, zs, cfg: IntegratorConfig | None = None,
                    variational: bool = True) -> FundamentalBatch:
    """Fundamental data for many spectral parameters at once.

    Members are grouped by |z| so that cheap members do not pay for the step
    count of expensive ones; with SPECDET_THREADS > 1 groups run in threads.
    """
    cfg = cfg or DEFAULT_CONFIG
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if zs.size == 0:
        empty = np.zeros(0, dtype=complex)
        return FundamentalBatch(empty, empty, empty, empty, empty, *(4 * (empty if variational else None,)),
                                np.zeros(0), np.zeros(0))
    mag = np.abs(zs)
    order = np.argsort(mag, kind="stable")
    # group boundaries by decades of |z| above 100
    key = np.floor(np.log10(np.maximum(mag[order], 100.0)) * 2).astype(int)
    groups = np.split(order, np.nonzero(np.diff(key))[0] + 1)
    work = [zs[gidx] for gidx in groups]
    if max_workers() > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers()) as ex:
            parts = list(ex.map(lambda w: _solve_chunk(prob, w, cfg, variational), work))
    else:
        parts = [_solve_chunk(prob, w, cfg, variational) for w in work]
    merged = _concat(parts)
    inv = np.empty_like(order)
    inv[np.concatenate(groups)] = np.arange(len(zs))
    names = ("z", "theta", "theta_q", "phi", "phi_q", "dot_theta", "dot_theta_q", "dot_phi",
             "dot_phi_q", "est_error", "log_scale")
    for nm in names:
        arr = getattr(merged, nm)
        if arr is not None:
            setattr(merged, nm, arr[inv])
    return merged


def integrate_fundamental(prob: SLProblem, z: complex, cfg: IntegratorConfig | None = None) -> FundamentalData:
    """theta, theta^[1], phi, phi^[1] at x=b for one spectral parameter."""
    return integrate_batch(prob, [z], cfg, variational=False).item(0)


def integrate_variational(prob: SLProblem, z: complex, cfg: IntegratorConfig | None = None) -> FundamentalData:
    """Fundamental data together with their z-derivatives at x=b."""
    return integrate_batch(prob, [z], cfg, variational=True).item(0)
