"""Regular Sturm-Liouville problems and their self-adjoint boundary conditions.

The operator is ``r^{-1}[-(d/dx) p (d/dx) + q]`` on a finite interval [a, b]
with quasi-derivative ``y^[1] = p y'``.  Boundary conditions are written as
``A (g(a), g^[1](a))^T = B (g(b), g^[1](b))^T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coeff_lang import CoeffExpr, as_expr, check_hypothesis, combine, constant, shift_argument

J = np.array([[0.0, -1.0], [1.0, 0.0]])
AB_TOL = 1e-10
DET_TOL = 1e-12


class ValidationError(ValueError):
    """Invalid problem data or boundary condition."""


@dataclass(frozen=True)
class SLProblem:
    a: float
    b: float
    p: CoeffExpr = field(default_factory=lambda: constant(1.0))
    q: CoeffExpr = field(default_factory=lambda: constant(0.0))
    r: CoeffExpr = field(default_factory=lambda: constant(1.0))

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        for name in ("p", "q", "r"):
            object.__setattr__(self, name, as_expr(getattr(self, name)))
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValidationError(f"need a < b, got a={self.a}, b={self.b}")

    @property
    def length(self) -> float:
        return self.b - self.a

    def is_flat(self) -> bool:
        """p = r = 1 identically."""
        return self.p.constant_value == 1.0 and self.r.constant_value == 1.0

    def hypothesis_report(self):
        return check_hypothesis(self.p, self.q, self.r, self.a, self.b)

    def with_potential(self, q) -> "SLProblem":
        return SLProblem(self.a, self.b, self.p, as_expr(q), self.r)

    def shifted(self, c: float) -> "SLProblem":
        """Same problem with q replaced by q + c r."""
        cr = combine("*", constant(c), self.r)
        return self.with_potential(combine("+", self.q, cr))

    def translated(self, s: float) -> "SLProblem":
        """Problem on [a+s, b+s] with coefficients moved along."""
        return SLProblem(self.a + s, self.b + s, shift_argument(self.p, s),
                         shift_argument(self.q, s), shift_argument(self.r, s))

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "p": str(self.p), "q": str(self.q), "r": str(self.r)}


# -- boundary conditions ------------------------------------------------------

@dataclass(frozen=True)
class Separated:
    """sin(alpha) g^[1](a) + cos(alpha) g(a) = 0, -sin(beta) g^[1](b) + cos(beta) g(b) = 0."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _mod_angle(self.alpha, math.pi))
        object.__setattr__(self, "beta", _mod_angle(self.beta, math.pi))

    kind = "separated"

    def to_dict(self) -> dict:
        return {"type": "separated", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class Coupled:
    """(g(b), g^[1](b)) = e^{i phase} R (g(a), g^[1](a)) with R in SL2(R)."""

    phase: float = 0.0
    R: tuple = ((1.0, 0.0), (0.0, 1.0))
    label: str = "coupled"

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(R)):
            raise ValidationError("R must be finite")
        det = R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
        if abs(det - 1.0) > DET_TOL * max(1.0, float(np.max(np.abs(R))) ** 2):
            raise ValidationError(f"det R must be 1, got {det!r}")
        object.__setattr__(self, "R", tuple(map(tuple, R.tolist())))
        object.__setattr__(self, "phase", _mod_angle(self.phase, 2 * math.pi))

    @property
    def kind(self) -> str:
        return self.label

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.R, dtype=float)

    def to_dict(self) -> dict:
        return {"type": self.label, "phase": self.phase, "R": [v for row in self.R for v in row]}


@dataclass(frozen=True)
class Krein:
    """Krein-von Neumann extension: coupled with R the z=0 monodromy matrix."""

    kind = "krein"

    def to_dict(self) -> dict:
        return {"type": "krein"}


BoundaryCondition = Separated | Coupled | Krein


def floquet(phase: float = 0.0) -> Coupled:
    return Coupled(phase, ((1.0, 0.0), (0.0, 1.0)), label="floquet")


def _mod_angle(v: float, period: float) -> float:
    v = float(v) % period
    # fold values that round to the period back to zero
    return 0.0 if abs(v - period) < 1e-15 * period else v


@dataclass(frozen=True)
class ABPair:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex).reshape(2, 2))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=complex).reshape(2, 2))


def validate_ab(pair: ABPair) -> bool:
    """rank(A B) = 2 and A J A* = B J B*."""
    A, B = pair.A, pair.B
    scale = max(1.0, float(np.linalg.norm(np.hstack([A, B]))))
    sv = np.linalg.svd(np.hstack([A, B]), compute_uv=False)
    if sv[-1] <= AB_TOL * scale:
        return False
    resid = np.linalg.norm(A @ J @ A.conj().T - B @ J @ B.conj().T)
    return bool(resid <= AB_TOL * scale**2)


def matrices_of(bc: BoundaryCondition, R_krein: np.ndarray | None = None) -> ABPair:
    if isinstance(bc, Separated):
        ca, sa = math.cos(bc.alpha), math.sin(bc.alpha)
        cb, sb = math.cos(bc.beta), math.sin(bc.beta)
        return ABPair([[ca, sa], [0, 0]], [[0, 0], [-cb, sb]])
    if isinstance(bc, Krein):
        if R_krein is None:
            raise ValidationError("Krein matrices need the problem's monodromy at z=0")
        return ABPair(np.asarray(R_krein, dtype=complex), np.eye(2))
    return ABPair(np.exp(1j * bc.phase) * bc.matrix, np.eye(2))


def _real_direction(row: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(row)))
    v = row * np.exp(-1j * np.angle(row[k]))
    if np.max(np.abs(v.imag)) > 1e-8 * np.max(np.abs(v)):
        raise ValidationError("boundary row is not a complex multiple of a real vector")
    return v.real


def canonicalize(pair: ABPair) -> BoundaryCondition:
    """Unique separated (alpha, beta) or coupled (phase, R) form of a valid pair.

    For coupled conditions (phase, R) and (phase + pi, -R) describe the same
    extension; the phase is returned in [0, pi).
    """
    if not validate_ab(pair):
        raise ValidationError("(A, B) does not define a self-adjoint boundary condition")
    A, B = pair.A, pair.B
    scale = max(1.0, float(np.linalg.norm(np.hstack([A, B]))))
    rank_a = int(np.sum(np.linalg.svd(A, compute_uv=False) > 1e-10 * scale))
    rank_b = int(np.sum(np.linalg.svd(B, compute_uv=False) > 1e-10 * scale))
    if rank_a == 1 and rank_b == 1:
        # left null vectors isolate the pure-a and pure-b conditions
        _, _, vh_b = np.linalg.svd(B.T)
        _, _, vh_a = np.linalg.svd(A.T)
        ua = _real_direction(vh_b[-1].conj() @ A)
        ub = _real_direction(vh_a[-1].conj() @ B)
        alpha = math.atan2(ua[1], ua[0])
        beta = math.atan2(ub[1], -ub[0])
        return Separated(alpha, beta)
    if rank_b != 2:
        raise ValidationError("coupled condition requires invertible B")
    M = np.linalg.solve(B, A)
    phase = (float(np.angle(np.linalg.det(M))) / 2.0) % math.pi
    R = M * np.exp(-1j * phase)
    if np.max(np.abs(R.imag)) > 1e-8 * max(1.0, float(np.max(np.abs(R)))):
        raise ValidationError("B^-1 A is not a phase times a real matrix")
    R = R.real
    R = R / math.sqrt(R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0])
    return Coupled(phase, R)


def resolve_bc(prob: SLProblem, bc: BoundaryCondition, cfg=None) -> Separated | Coupled:
    """Replace the Krein marker by the concrete coupled condition."""
    if isinstance(bc, Krein):
        return Coupled(0.0, krein_matrix(prob, cfg), label="krein")
    return bc


def krein_matrix(prob: SLProblem, cfg=None) -> np.ndarray:
    """Monodromy [[theta, phi], [theta^[1], phi^[1]]] at z=0, x=b."""
    from .ode_engine import integrate_fundamental

    fd = integrate_fundamental(prob, 0.0, cfg)
    R = np.array([[fd.theta, fd.phi], [fd.theta_q, fd.phi_q]]).real
    det = R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
    if abs(det - 1.0) > 1e-10 * max(1.0, float(np.max(np.abs(R))) ** 2):
        raise ValidationError(f"monodromy determinant {det!r} differs from 1")
    # remove the last rounding so the matrix passes the SL2 check exactly
    return R / math.sqrt(det)


# -- problem files -------------------------------------------------------------

try:  # Python >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml


def _number(v, key: str) -> float:
    if isinstance(v, bool):
        raise ValidationError(f"{key}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    e = as_expr(v)
    if not e.is_constant:
        raise ValidationError(f"{key}: expected a constant, got {v!r}")
    return float(e.constant_value)


def read_problem_file(path: str | Path) -> dict:
    """Load a TOML problem file into a plain dict."""
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    except _toml.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def problem_from_dict(data: dict) -> tuple[SLProblem, BoundaryCondition]:
    for key in ("a", "b"):
        if key not in data:
            raise ValidationError(f"missing key {key!r}")
    prob = SLProblem(_number(data["a"], "a"), _number(data["b"], "b"),
                     as_expr(data.get("p", "1")), as_expr(data.get("q", "0")),
                     as_expr(data.get("r", "1")))
    return prob, bc_from_dict(data.get("bc", {"type": "separated"}))


def bc_from_dict(bc: dict) -> BoundaryCondition:
    kind = str(bc.get("type", "separated")).lower()
    if kind == "separated":
        return Separated(_number(bc.get("alpha", 0), "bc.alpha"), _number(bc.get("beta", 0), "bc.beta"))
    if kind == "floquet":
        return floquet(_number(bc.get("phase", 0), "bc.phase"))
    if kind == "krein":
        return Krein()
    if kind == "coupled":
        R = bc.get("R", [1, 0, 0, 1])
        if len(R) != 4:
            raise ValidationError("bc.R must have 4 entries (row-major)")
        R = [_number(v, "bc.R") for v in R]
        return Coupled(_number(bc.get("phase", 0), "bc.phase"), ((R[0], R[1]), (R[2], R[3])))
    raise ValidationError(f"unknown bc.type {kind!r}")


def load_problem(path: str | Path) -> tuple[SLProblem, BoundaryCondition]:
    return problem_from_dict(read_problem_file(path))
