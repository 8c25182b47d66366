"""Eigenvalues, resolvent traces, Fredholm determinant ratios and the product formula."""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from .charfunc import NearSpectrumError, asymptotics, char_batch, characteristic
from .ode_engine import IntegratorConfig, liouville_length, max_workers
from .sl_core import BoundaryCondition, Coupled, SLProblem, resolve_bc

# eigenvalue searches need more digits than a single evaluation of F
SEARCH_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)

DOUBLE_F_TOL = 1e-8
DOUBLE_DF_TOL = 1e-6
ZERO_MODE_TOL = 1e-7
DOUBLE_ZERO_TOL = 1e-5
NEAR_SPECTRUM_TOL = 1e-9


class SamplingBudgetError(RuntimeError):
    """The scan needed more samples than allowed."""


@dataclass(frozen=True)
class Eigenvalue:
    lam: float
    multiplicity: int = 1


@dataclass
class Spectrum:
    eigenvalues: list[Eigenvalue]
    zero_modes: int
    negatives: int
    search_window: tuple[float, float]
    complete_from_bottom: bool = True
    warnings: list[str] = field(default_factory=list)

    def values(self) -> np.ndarray:
        """Eigenvalues repeated according to multiplicity."""
        return np.array([e.lam for e in self.eigenvalues for _ in range(e.multiplicity)])

    def count(self) -> int:
        return sum(e.multiplicity for e in self.eigenvalues)

    def to_rows(self) -> list[dict]:
        return [{"index": i, "lambda": e.lam, "multiplicity": e.multiplicity}
                for i, e in enumerate(self.eigenvalues)]


class _RealChar:
    """F restricted to the real axis, rotated to be real for coupled conditions."""

    def __init__(self, prob: SLProblem, bc: BoundaryCondition, cfg: IntegratorConfig):
        self.prob = prob
        self.bc = resolve_bc(prob, bc, cfg)
        self.cfg = cfg
        self.rot = cmath.exp(-1j * self.bc.phase) if isinstance(self.bc, Coupled) else 1.0
        self.asym = asymptotics(prob, self.bc)
        self.evals = 0

    def __call__(self, lams: np.ndarray):
        """Real values G, G' and the local magnitude scale, all in mantissa units."""
        lams = np.asarray(lams, dtype=float)
        self.evals += lams.size
        cb = char_batch(self.prob, self.bc, lams.astype(complex), self.cfg)
        G = (self.rot * cb.F).real
        dG = (self.rot * cb.dF).real
        return G, dG, self.scale(lams, cb.log_scale)

    def scale(self, lams: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
        w = -1j * np.sqrt(lams.astype(complex))
        mag = abs(self.asym.C) * np.maximum(np.abs(w), 1.0) ** self.asym.kappa
        return mag * np.exp(np.maximum(w.real, 0.0) * self.asym.c - log_scale)


def _spacing(lam: float, qmin: float, c: float) -> float:
    """Asymptotic distance between neighbouring eigenvalues near lam."""
    return (math.pi / c) * (2.0 * math.sqrt(abs(lam - qmin)) + math.pi / c)


def _potential_floor(prob: SLProblem) -> float:
    xs = np.linspace(prob.a, prob.b, 201)
    return float(np.min(prob.q.vectorized(xs) / prob.r.vectorized(xs)))


def _lower_bound(g: _RealChar, qmin: float) -> float:
    """A point below the spectrum, where F is well described by its asymptotics."""
    L = min(0.0, qmin) - 1.0
    for _ in range(60):
        G, _, sc = g(np.array([L, 2 * L - 1.0]))
        sign = np.sign((g.rot * g.asym.C).real)
        ratio = G * sign / sc
        if np.all((ratio > 0.5) & (ratio < 1.5)):
            return L
        L = 2 * L - 1.0
    raise SamplingBudgetError("could not locate a lower bound of the spectrum")


def _refine_simple(g: _RealChar, lo, hi, Glo, Ghi, tol_rel: float = 1e-12, max_iter: int = 80):
    """Vectorized safeguarded Newton iteration inside sign-change brackets."""
    lo, hi = np.array(lo, float), np.array(hi, float)
    Glo, Ghi = np.array(Glo, float), np.array(Ghi, float)
    x = lo - Glo * (hi - lo) / (Ghi - Glo)
    x = np.where((x > lo) & (x < hi), x, 0.5 * (lo + hi))
    done = np.zeros(lo.shape, bool)
    last_step = np.full(lo.shape, np.inf)
    for _ in range(max_iter):
        act = ~done
        if not act.any():
            break
        G, dG, _ = g(x[act])
        xa, la, ha = x[act], lo[act], hi[act]
        gl = Glo[act]
        left = np.sign(G) == np.sign(gl)
        la = np.where(left, xa, la)
        ha = np.where(left, ha, xa)
        Glo[act] = np.where(left, G, gl)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xa - G / dG
        ok = np.isfinite(newton) & (newton > la) & (newton < ha)
        nx = np.where(ok, newton, 0.5 * (la + ha))
        tol = tol_rel * np.maximum(1.0, np.abs(xa))
        step = np.abs(nx - xa)
        # once steps stop shrinking near the tolerance we are at the noise floor
        stalled = ok & (step < 1e3 * tol) & (step > 0.5 * last_step[act])
        conv = (step <= tol) | (ha - la <= tol) | (G == 0) | stalled
        last_step[act] = step
        lo[act], hi[act] = la, ha
        x[act] = np.where(G == 0, xa, nx)
        d = done.copy()
        d[act] = conv
        done = d
    return x, done


def _refine_critical(g: _RealChar, lo, hi, dlo, dhi, tol_rel: float = 1e-13, max_iter: int = 100):
    """Zeros of G' inside brackets where G' changes sign (Illinois regula falsi)."""
    lo, hi = np.array(lo, float), np.array(hi, float)
    dlo, dhi = np.array(dlo, float), np.array(dhi, float)
    side = np.zeros(lo.shape, int)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        width = hi - lo
        if np.all(width <= tol_rel * np.maximum(1.0, np.abs(x))):
            break
        x = (lo * dhi - hi * dlo) / (dhi - dlo)
        bad = ~np.isfinite(x) | (x <= lo) | (x >= hi)
        x = np.where(bad, 0.5 * (lo + hi), x)
        _, d, _ = g(x)
        left = np.sign(d) == np.sign(dlo)
        lo = np.where(left, x, lo)
        dlo = np.where(left, d, dlo)
        hi = np.where(left, hi, x)
        dhi = np.where(left, dhi, d)
        # Illinois modification keeps both ends moving
        dhi = np.where(left & (side == 1), 0.5 * dhi, dhi)
        dlo = np.where(~left & (side == -1), 0.5 * dlo, dlo)
        side = np.where(left, 1, -1)
    return 0.5 * (lo + hi)


def _scan(g: _RealChar, lo: float, hi: float, qmin: float, c: float, budget: int):
    pts = [lo]
    while pts[-1] < hi:
        pts.append(min(hi, pts[-1] + 0.5 * _spacing(pts[-1], qmin, c)))
        if len(pts) > budget:
            raise SamplingBudgetError(f"more than {budget} samples needed on [{lo}, {hi}]")
    lams = np.array(pts)
    G, dG, sc = g(lams)
    return lams, G, dG, sc


def _analyse(g: _RealChar, lams, G, dG, sc, warnings: list[str]):
    """Bracket sign changes and classify extrema of G between samples."""
    simple_lo, simple_hi, simple_glo, simple_ghi = [], [], [], []
    doubles: list[float] = []
    crit = []
    for i in range(len(lams) - 1):
        if G[i] == 0.0:
            # exact hit at a sample: nudge into a bracket
            G[i] = np.copysign(1e-300, -G[i + 1]) if G[i + 1] != 0 else 1e-300
        if np.sign(G[i]) != np.sign(G[i + 1]):
            simple_lo.append(lams[i]); simple_hi.append(lams[i + 1])
            simple_glo.append(G[i]); simple_ghi.append(G[i + 1])
        elif np.sign(dG[i]) != np.sign(dG[i + 1]) and np.sign(dG[i]) == -np.sign(G[i]):
            # |G| decreases then increases: possible touching or hidden pair
            crit.append(i)
    if crit:
        idx = np.array(crit)
        xc = _refine_critical(g, lams[idx], lams[idx + 1], dG[idx], dG[idx + 1])
        Gc, dGc, scc = g(xc)
        for j, i in enumerate(idx):
            if np.sign(Gc[j]) != np.sign(G[i]):
                simple_lo += [lams[i], xc[j]]; simple_hi += [xc[j], lams[i + 1]]
                simple_glo += [G[i], Gc[j]]; simple_ghi += [Gc[j], G[i + 1]]
            elif abs(Gc[j]) <= DOUBLE_F_TOL * scc[j] and abs(dGc[j]) <= DOUBLE_DF_TOL * scc[j]:
                h = 1e-4 * _spacing(xc[j], 0.0, 1.0)
                _, dpm, _ = g(np.array([xc[j] - h, xc[j] + h]))
                curv = (dpm[1] - dpm[0]) / (2 * h)
                if np.sign(curv) == np.sign(G[i]):
                    doubles.append(float(xc[j]))
                else:
                    warnings.append(f"unconfirmed double zero near {xc[j]:.12g}")
            elif abs(Gc[j]) <= 1e-4 * scc[j]:
                warnings.append(f"unresolved near-degenerate pair near {xc[j]:.12g}")
    simples = []
    if simple_lo:
        x, conv = _refine_simple(g, simple_lo, simple_hi, simple_glo, simple_ghi)
        if not np.all(conv):
            warnings.append("some brackets did not converge to full tolerance")
        simples = [float(v) for v in x]
    return simples, doubles


def find_eigenvalues(prob: SLProblem, bc: BoundaryCondition, window: tuple[float, float] | None = None,
                     count_target: int | None = None, cfg: IntegratorConfig | None = None,
                     budget: int = 200_000) -> Spectrum:
    """Eigenvalues in ``window`` or the lowest ``count_target`` ones (with multiplicity)."""
    if window is None and not count_target:
        raise ValueError("need a finite window or count_target >= 1")
    cfg = cfg or SEARCH_CONFIG
    g = _RealChar(prob, bc, cfg)
    c = liouville_length(prob)
    qmin = _potential_floor(prob)
    warnings: list[str] = []
    bottom = _lower_bound(g, qmin)
    lo = bottom if window is None else float(window[0])
    from_bottom = lo <= bottom
    found_simple: list[float] = []
    found_double: list[float] = []

    def process(a: float, b: float):
        lams, G, dG, sc = _scan(g, a, b, qmin, c, budget)
        return _analyse(g, lams, G, dG, sc, warnings)

    if window is not None:
        hi = float(window[1])
        if not hi > lo:
            raise ValueError("window must satisfy lo < hi")
        parts = _partition(lo, hi, qmin, c)
        if max_workers() > 1 and len(parts) > 1:
            with ThreadPoolExecutor(max_workers()) as ex:
                results = list(ex.map(lambda ab: process(*ab), parts))
        else:
            results = [process(a, b) for a, b in parts]
        for s, d in results:
            found_simple += s
            found_double += d
    else:
        a = lo
        need = int(count_target)
        while True:
            # grow the window by a Weyl estimate of the missing eigenvalues
            have = len(found_simple) + 2 * len(found_double)
            missing = max(need - have, 1)
            n_est = c * math.sqrt(max(a - qmin, 0.0)) / math.pi
            b = qmin + (math.pi * (n_est + missing + 2) / c) ** 2
            s, d = process(a, b)
            found_simple += s
            found_double += d
            if len(found_simple) + 2 * len(found_double) >= need:
                break
            a = b
        hi = b
    eig = _merge(found_simple, found_double)
    if count_target and window is None:
        eig = _truncate(eig, int(count_target))
        hi = eig[-1].lam if eig else hi
    spec = _finish(eig, (lo, hi), from_bottom, warnings)
    return spec


def _partition(lo: float, hi: float, qmin: float, c: float, width_in_eigs: int = 40):
    """Split a window into pieces holding roughly equal numbers of eigenvalues."""
    def n_of(lam):
        return c * math.sqrt(max(lam - qmin, 0.0)) / math.pi

    n_lo, n_hi = n_of(lo), n_of(hi)
    pieces = max(1, int((n_hi - n_lo) // width_in_eigs))
    if pieces == 1:
        return [(lo, hi)]
    cuts = [lo] + [qmin + (math.pi * (n_lo + (n_hi - n_lo) * k / pieces) / c) ** 2 for k in range(1, pieces)] + [hi]
    return list(zip(cuts[:-1], cuts[1:]))


def _merge(simple: list[float], double: list[float]) -> list[Eigenvalue]:
    items = sorted([(v, 1) for v in simple] + [(v, 2) for v in double])
    out: list[Eigenvalue] = []
    for v, m in items:
        if out and abs(v - out[-1].lam) <= 1e-9 * max(1.0, abs(v)):
            # two roots closer than the refinement tolerance: one double eigenvalue
            prev = out[-1]
            out[-1] = Eigenvalue(prev.lam, min(2, prev.multiplicity + m))
            continue
        out.append(Eigenvalue(v, m))
    return out


def _truncate(eig: list[Eigenvalue], count: int) -> list[Eigenvalue]:
    out, total = [], 0
    for e in eig:
        if total >= count:
            break
        out.append(e)
        total += e.multiplicity
    return out


def _pair_double_zero(eig: list[Eigenvalue]) -> list[Eigenvalue]:
    """Merge two simple roots straddling 0 into a double zero mode.

    A double root of F is only resolved to about the square root of the noise
    in F, so the two roots can fall well outside ZERO_MODE_TOL.
    """
    for i in range(len(eig) - 1):
        a, b = eig[i], eig[i + 1]
        if a.multiplicity != 1 or b.multiplicity != 1 or not (a.lam < 0 < b.lam):
            continue
        width = b.lam - a.lam
        left = eig[i - 1].lam if i > 0 else -math.inf
        right = eig[i + 2].lam if i + 2 < len(eig) else math.inf
        if width <= DOUBLE_ZERO_TOL and min(a.lam - left, right - b.lam) > 1e3 * width:
            return eig[:i] + [Eigenvalue(0.0, 2)] + eig[i + 2:]
    return eig


def _finish(eig: list[Eigenvalue], window, from_bottom: bool, warnings: list[str]) -> Spectrum:
    eig = _pair_double_zero(eig)
    zero_modes = 0
    negatives = 0
    lams = [e.lam for e in eig]
    cleaned = []
    for i, e in enumerate(eig):
        gaps = [abs(lams[j] - e.lam) for j in (i - 1, i + 1) if 0 <= j < len(lams)]
        gap = min(gaps) if gaps else 1.0
        if abs(e.lam) <= ZERO_MODE_TOL * max(1.0, gap) or (gap <= ZERO_MODE_TOL and abs(e.lam) <= ZERO_MODE_TOL):
            zero_modes += e.multiplicity
            if cleaned and cleaned[-1].lam == 0.0:
                # a double zero at 0 resolved as two adjacent simple roots
                cleaned[-1] = Eigenvalue(0.0, cleaned[-1].multiplicity + e.multiplicity)
            else:
                cleaned.append(Eigenvalue(0.0, e.multiplicity))
            continue
        if e.lam < 0:
            negatives += e.multiplicity
        cleaned.append(e)
    return Spectrum(cleaned, zero_modes, negatives, (float(window[0]), float(window[1])),
                    from_bottom, warnings)


def weyl_ratio(spec: Spectrum, prob: SLProblem) -> float:
    """lambda_j / j^2 for the largest found j, relative to the Weyl constant."""
    vals = spec.values()
    if len(vals) < 30:
        raise ValueError("weyl_ratio needs at least 30 eigenvalues")
    if not spec.complete_from_bottom:
        raise ValueError("weyl_ratio needs the spectrum from its bottom")
    j = len(vals)
    c = liouville_length(prob)
    return float(vals[-1] / j**2 / (math.pi**2 / c**2))


# -- determinants and traces ---------------------------------------------------

def _checked_value(prob, bc, z, cfg):
    cv = characteristic(prob, bc, z, cfg)
    asym = asymptotics(prob, bc, cfg)
    w = -1j * complex(np.sqrt(complex(z)))
    w = w if w.real >= 0 else -w
    mag = abs(asym.C) * max(abs(w), 1.0) ** asym.kappa * math.exp(w.real * asym.c - cv.log_scale)
    if abs(cv.F) < NEAR_SPECTRUM_TOL * mag:
        raise NearSpectrumError(f"z={z} is numerically an eigenvalue")
    return cv


def fredholm_det_ratio(prob: SLProblem, bc: BoundaryCondition, z: complex, z0: complex,
                       cfg: IntegratorConfig | None = None) -> complex:
    """F(z) / F(z0)."""
    bc = resolve_bc(prob, bc, cfg)
    den = _checked_value(prob, bc, z0, cfg)
    num = characteristic(prob, bc, z, cfg, derivative=False)
    return num.F / den.F * math.exp(num.log_scale - den.log_scale)


def trace_resolvent(prob: SLProblem, bc: BoundaryCondition, z: complex,
                    cfg: IntegratorConfig | None = None) -> complex:
    """tr (H - z)^{-1} = -F'(z)/F(z)."""
    cv = _checked_value(prob, resolve_bc(prob, bc, cfg), z, cfg)
    return -cv.dF / cv.F


@dataclass
class TailModel:
    """lambda_k ~ A (k + delta)^2 + beta for indices beyond the found ones."""

    A: float
    delta: float
    beta: float
    K: int

    def sum_inverse(self, z: complex) -> complex:
        """sum_{k>K} 1/(lambda_k - z) with the model eigenvalues."""
        # 1/(A(k+d)^2 - w) expanded to second order in w / (A (k+d)^2)
        w = z - self.beta
        x0 = self.K + 1 + self.delta
        s2 = float(polygamma(1, x0)) / self.A
        s4 = float(polygamma(3, x0)) / 6.0 / self.A**2
        s6 = float(polygamma(5, x0)) / 120.0 / self.A**3
        return s2 + w * s4 + w * w * s6


def _tail_model(vals: np.ndarray, c: float) -> tuple[TailModel, TailModel]:
    """Fit the Weyl-type tail twice (different index ranges) to gauge its uncertainty."""
    K = len(vals)
    A = (math.pi / c) ** 2
    idx = np.arange(1, K + 1, dtype=float)
    models = []
    for n_fit in (max(4, K // 10), max(8, K // 5)):
        sl = slice(K - n_fit, K)
        # lambda = A (k + d)^2 + beta  <=>  lambda - A k^2 = 2 A d k + (A d^2 + beta)
        M = np.vstack([2 * A * idx[sl], np.ones(n_fit)]).T
        coef, *_ = np.linalg.lstsq(M, vals[sl] - A * idx[sl] ** 2, rcond=None)
        d = coef[0]
        beta = coef[1] - A * d * d
        models.append(TailModel(A, float(d), float(beta), K))
    return models[0], models[1]


@dataclass
class ProductResult:
    value: complex
    truncated: complex
    tail_log: complex
    tail_bound: float
    K: int


def product_oracle(spec: Spectrum, z: complex, z0: complex, prob: SLProblem | None = None,
                   skip_zero: bool = False) -> ProductResult:
    """prod_k ((lambda_k - z)/(lambda_k - z0))^{m_k} with a Weyl-law tail.

    ``skip_zero`` drops zero modes from the product (their powers of z are
    handled by the caller).
    """
    vals = spec.values()
    if skip_zero:
        vals = vals[vals != 0.0]
    if z == z0:
        return ProductResult(1.0, 1.0, 0.0, 0.0, len(vals))
    logs = np.log((vals - z) / (vals - z0)).sum()
    truncated = complex(np.prod((vals - z) / (vals - z0)))
    if prob is None or not spec.complete_from_bottom or len(spec.values()) < 10:
        return ProductResult(truncated, truncated, 0.0, float("inf"), len(vals))
    c = liouville_length(prob)
    m1, m2 = _tail_model(spec.values(), c)
    # log prod_{k>K} (1 - (z - z0)/(lambda_k - z0)) ~ -(z - z0) sum 1/(lambda_k - z0) - ...
    dz = z - z0
    t1 = -dz * m1.sum_inverse(z0)
    second = 0.5 * abs(dz) ** 2 * abs(m1.sum_inverse(z0)) ** 2 / max(1, len(vals)) + \
        0.5 * abs(dz) ** 2 * float(polygamma(3, m1.K + 1 + m1.delta)) / 6.0 / m1.A**2
    model_spread = abs(dz) * abs(m1.sum_inverse(z0) - m2.sum_inverse(z0))
    tail_log = t1
    value = cmath.exp(logs + tail_log)
    bound = abs(value) * (math.exp(second + model_spread + 1e-14) - 1.0)
    return ProductResult(value, truncated, tail_log, bound, len(vals))


@dataclass
class TraceSum:
    value: complex
    truncated: complex
    tail: complex
    tail_bound: float


def eigenvalue_trace_sum(spec: Spectrum, z: complex, prob: SLProblem) -> TraceSum:
    """sum_k m_k / (lambda_k - z) with the Weyl-law tail beyond the found eigenvalues."""
    vals = spec.values()
    truncated = complex(np.sum(1.0 / (vals - z)))
    c = liouville_length(prob)
    m1, m2 = _tail_model(vals, c)
    tail = m1.sum_inverse(z)
    # next neglected term of the expansion plus disagreement of the two fits
    w = abs(z - m1.beta)
    nxt = w**3 * float(polygamma(7, m1.K + 1 + m1.delta)) / 5040.0 / m1.A**4
    bound = abs(tail - m2.sum_inverse(z)) + nxt
    return TraceSum(truncated + tail, truncated, tail, float(bound))


def nonpositive_spectrum(prob: SLProblem, bc: BoundaryCondition,
                         cfg: IntegratorConfig | None = None) -> Spectrum:
    """All eigenvalues up to a little above 0."""
    cfg = cfg or SEARCH_CONFIG
    g = _RealChar(prob, bc, cfg)
    c = liouville_length(prob)
    lo = _lower_bound(g, _potential_floor(prob))
    hi = 0.05 * (math.pi / c) ** 2
    return find_eigenvalues(prob, bc, window=(lo, hi), cfg=cfg)


def count_nonpositive(prob: SLProblem, bc: BoundaryCondition,
                      cfg: IntegratorConfig | None = None) -> tuple[int, int]:
    """(number of negative eigenvalues, multiplicity of the eigenvalue 0)."""
    spec = nonpositive_spectrum(prob, bc, cfg)
    return spec.negatives, spec.zero_modes


def double_negatives(prob: SLProblem, bc: BoundaryCondition,
                     cfg: IntegratorConfig | None = None) -> list[float]:
    """Negative eigenvalues of multiplicity two (possible for coupled conditions only)."""
    if not isinstance(resolve_bc(prob, bc, cfg), Coupled):
        return []
    return [e.lam for e in nonpositive_spectrum(prob, bc, cfg).eigenvalues if e.lam < 0 and e.multiplicity == 2]
