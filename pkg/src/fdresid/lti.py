"""Discrete-time LTI stochastic systems, steady-state Kalman gain, and
state-space to transfer-function conversion.

Transfer functions are stored as coefficient arrays in powers of q^-1,
constant term first, which is the layout ``scipy.signal.lfilter`` expects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

MIN_PHASE_TOL = 1e-9


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class SolverError(RuntimeError):
    """Iterative solver failed to converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class UnsupportedShapeError(ValidationError):
    pass


class InversionError(ValidationError):
    """Transfer function has no stable causal inverse."""


def spectral_radius(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValidationError(f"spectral_radius needs a square matrix, got {M.shape}")
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    a = a.copy()
    a.setflags(write=False)
    return a


def _check_psd(M: np.ndarray, name: str, strict: bool = False) -> None:
    if not np.allclose(M, M.T, atol=1e-12, rtol=1e-10):
        raise ValidationError(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(M)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if strict and eig.min() <= 0:
        raise ValidationError(f"{name} must be positive definite (min eigenvalue {eig.min():.3e})")
    if eig.min() < -1e-12 * scale:
        raise ValidationError(f"{name} must be positive semidefinite (min eigenvalue {eig.min():.3e})")


@dataclass(frozen=True)
class StateSpaceModel:
    """x(t+1) = A x + B u + w,  y = C x + v with joint Gaussian (w, v).

    Only stable plants are accepted: the output-error residual is a zero-gain
    observer and diverges for unstable A.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sigma_w: np.ndarray
    sigma_v: np.ndarray
    sigma_wv: np.ndarray | None = None

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        sw = _as_matrix(self.sigma_w, "sigma_w")
        sv = _as_matrix(self.sigma_v, "sigma_v")
        p = C.shape[0]
        swv = np.zeros((n, p)) if self.sigma_wv is None else _as_matrix(self.sigma_wv, "sigma_wv")
        if B.shape[0] != n:
            raise ValidationError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValidationError(f"C must have {n} columns, got {C.shape}")
        if sw.shape != (n, n):
            raise ValidationError(f"sigma_w must be {n}x{n}, got {sw.shape}")
        if sv.shape != (p, p):
            raise ValidationError(f"sigma_v must be {p}x{p}, got {sv.shape}")
        if swv.shape != (n, p):
            raise ValidationError(f"sigma_wv must be {n}x{p}, got {swv.shape}")
        _check_psd(sw, "sigma_w")
        _check_psd(sv, "sigma_v", strict=True)
        rho = spectral_radius(A)
        if rho >= 1.0:
            raise ValidationError(f"A must be stable, spectral radius is {rho:.6f}")
        for name, val in (("A", A), ("B", B), ("C", C), ("sigma_w", sw),
                          ("sigma_v", sv), ("sigma_wv", swv)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def joint_covariance(self) -> np.ndarray:
        return np.block([[self.sigma_w, self.sigma_wv], [self.sigma_wv.T, self.sigma_v]])

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "sigma_w": self.sigma_w.tolist(),
            "sigma_v": self.sigma_v.tolist(),
            "sigma_wv": self.sigma_wv.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpaceModel":
        return cls(d["A"], d["B"], d["C"], d["sigma_w"], d["sigma_v"], d.get("sigma_wv"))


@dataclass(frozen=True)
class KalmanSolution:
    K: np.ndarray
    lam: np.ndarray
    P: np.ndarray
    iterations: int


def riccati_residual(model: StateSpaceModel, P: np.ndarray, K: np.ndarray | None = None) -> float:
    """Frobenius norm of P - (A P A' + Sw - K (C P C' + Sv) K')."""
    A, C = model.A, model.C
    lam = C @ P @ C.T + model.sigma_v
    if K is None:
        K = np.linalg.solve(lam.T, (A @ P @ C.T + model.sigma_wv).T).T
    rhs = A @ P @ A.T + model.sigma_w - K @ lam @ K.T
    return float(np.linalg.norm(P - rhs))


def solve_dare(model: StateSpaceModel, tol: float = 1e-12, max_iter: int = 100_000) -> KalmanSolution:
    """Steady-state one-step predictor gain by fixed-point Riccati iteration.

    Iterates P <- A P A' + Sw - K (C P C' + Sv) K' with
    K = (A P C' + Swv)(C P C' + Sv)^-1, starting from P = Sw, until successive
    iterates differ by less than ``tol * max(1, ||P||)`` in Frobenius norm.
    """
    A, C = model.A, model.C
    Sw, Sv, Swv = model.sigma_w, model.sigma_v, model.sigma_wv
    P = Sw.copy()
    step = np.inf
    for it in range(1, max_iter + 1):
        lam = C @ P @ C.T + Sv
        K = np.linalg.solve(lam.T, (A @ P @ C.T + Swv).T).T
        P_next = A @ P @ A.T + Sw - K @ lam @ K.T
        P_next = 0.5 * (P_next + P_next.T)
        step = float(np.linalg.norm(P_next - P))
        P = P_next
        if step < tol * max(1.0, float(np.linalg.norm(P))):
            break
    else:
        raise SolverError(f"Riccati iteration did not converge in {max_iter} iterations", step)

    lam = C @ P @ C.T + Sv
    lam = 0.5 * (lam + lam.T)
    K = np.linalg.solve(lam.T, (A @ P @ C.T + Swv).T).T
    rho = spectral_radius(A - K @ C)
    if rho >= 1.0:
        raise SolverError(f"closed-loop A - KC is unstable (spectral radius {rho:.6f})",
                          riccati_residual(model, P, K))
    for a in (K, lam, P):
        a.setflags(write=False)
    return KalmanSolution(K=K, lam=lam, P=P, iterations=it)


@dataclass(frozen=True)
class RationalTransferFunction:
    """numerator(q^-1) / denominator(q^-1), denominator monic."""

    numerator: np.ndarray
    denominator: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.numerator, dtype=float)).copy()
        den = np.atleast_1d(np.asarray(self.denominator, dtype=float)).copy()
        if num.ndim != 1 or den.ndim != 1 or num.size == 0 or den.size == 0:
            raise ValidationError("numerator and denominator must be non-empty 1-D coefficient lists")
        if den[0] == 0:
            raise ValidationError("denominator constant term must be nonzero")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValidationError("transfer function coefficients must be finite")
        if den[0] != 1.0:
            num = num / den[0]
            den = den / den[0]
            den[0] = 1.0
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @classmethod
    def unit(cls) -> "RationalTransferFunction":
        return cls([1.0], [1.0])

    def __call__(self, omega):
        return eval_freq(self, omega)

    def __mul__(self, other: "RationalTransferFunction") -> "RationalTransferFunction":
        return RationalTransferFunction(np.convolve(self.numerator, other.numerator),
                                        np.convolve(self.denominator, other.denominator))

    def poles(self) -> np.ndarray:
        return np.roots(self.denominator)

    def zeros(self) -> np.ndarray:
        return np.roots(np.trim_zeros(self.numerator, "f")) if np.any(self.numerator) else np.array([])

    def is_stable(self) -> bool:
        p = self.poles()
        return bool(p.size == 0 or np.max(np.abs(p)) < 1.0)

    def is_minimum_phase(self, tol: float = MIN_PHASE_TOL) -> bool:
        if self.numerator[0] == 0:
            return False
        z = np.roots(self.numerator)
        return bool(z.size == 0 or np.max(np.abs(z)) < 1.0 - tol)

    def inverse(self) -> "RationalTransferFunction":
        """Stable causal inverse; only defined for minimum-phase, biproper tf."""
        if not self.is_minimum_phase():
            raise InversionError("transfer function is not minimum phase; inverse would be unstable or non-causal")
        return RationalTransferFunction(self.denominator, self.numerator)

    def filter(self, x) -> np.ndarray:
        """Causal zero-initial-state filtering."""
        return signal.lfilter(self.numerator, self.denominator, np.asarray(x, dtype=float))


def eval_freq(tf: RationalTransferFunction, omega):
    """Evaluate tf at q = exp(j*omega); omega may be an array."""
    w = np.asarray(omega, dtype=float)
    zinv = np.exp(-1j * w)
    # coefficient lists are in ascending powers of q^-1
    num = np.polyval(tf.numerator[::-1], zinv)
    den = np.polyval(tf.denominator[::-1], zinv)
    out = num / den
    return complex(out) if np.ndim(out) == 0 else out


def leverrier(A) -> tuple[np.ndarray, list[np.ndarray]]:
    """Faddeev-LeVerrier: det(qI-A) coefficients and adjugate matrix terms.

    Returns ``(c, N)`` with det(qI-A) = sum_k c[k] q^(n-k) and
    adj(qI-A) = sum_k N[k] q^(n-1-k).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    c = np.zeros(n + 1)
    c[0] = 1.0
    N = [np.eye(n)]
    for k in range(1, n + 1):
        M = A @ N[-1]
        c[k] = -np.trace(M) / k
        if k < n:
            N.append(M + c[k] * np.eye(n))
    return c, N


def resolvent_numerator(C, A, b) -> np.ndarray:
    """Numerator in q^-1 of C (qI - A)^-1 b over the monic det(qI-A)."""
    C = np.atleast_2d(C)
    b = np.asarray(b, dtype=float).reshape(-1)
    _, N = leverrier(A)
    return np.concatenate([[0.0], [float((C @ Nk @ b)[0]) for Nk in N]])


def ss_to_tf(model: StateSpaceModel, K) -> tuple[RationalTransferFunction, RationalTransferFunction]:
    """G(q) = C(qI-A)^-1 B and H(q) = C(qI-A)^-1 K + 1 for SISO models."""
    if model.m != 1 or model.p != 1:
        raise UnsupportedShapeError(f"ss_to_tf supports SISO only, got m={model.m}, p={model.p}")
    K = np.asarray(K, dtype=float).reshape(model.n, 1)
    den, _ = leverrier(model.A)
    G = RationalTransferFunction(resolvent_numerator(model.C, model.A, model.B[:, 0]), den)
    H = RationalTransferFunction(den + resolvent_numerator(model.C, model.A, K[:, 0]), den)
    return G, H
