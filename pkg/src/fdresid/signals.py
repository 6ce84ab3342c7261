"""Fault signals, correlated Gaussian noise and closed-form plant simulation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .lti import StateSpaceModel, ValidationError, leverrier, resolvent_numerator

FAULT_KINDS = ("none", "step", "drift", "sine")


@dataclass(frozen=True)
class FaultSpec:
    """Output-additive fault.

    drift ramps linearly from 0 at ``onset`` to ``amplitude`` at the end of the
    horizon; sine starts with zero phase at ``onset``.
    """

    kind: str = "none"
    amplitude: float = 0.0
    onset: int = 0
    omega: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in FAULT_KINDS:
            raise ValidationError(f"fault kind must be one of {FAULT_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.amplitude):
            raise ValidationError("fault amplitude must be finite")
        if int(self.onset) != self.onset or self.onset < 0:
            raise ValidationError(f"fault onset must be a non-negative integer, got {self.onset}")
        if kind == "sine" and (self.omega is None or not 0 < self.omega < np.pi):
            raise ValidationError(f"sine fault needs omega in (0, pi), got {self.omega}")

    def shifted(self, offset: int) -> "FaultSpec":
        return FaultSpec(self.kind, self.amplitude, self.onset + offset, self.omega)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "amplitude": self.amplitude, "onset": self.onset}
        if self.omega is not None:
            d["omega"] = self.omega
        return d


@dataclass(frozen=True)
class NoiseRealization:
    w: np.ndarray  # (N, n)
    v: np.ndarray  # (N,)
    seed: object = None

    def __len__(self) -> int:
        return self.v.shape[0]


@dataclass(frozen=True)
class SimulationRecord:
    y: np.ndarray
    u: np.ndarray
    f: np.ndarray
    fault_onset: int
    model_id: str = ""

    def __post_init__(self):
        if not (len(self.y) == len(self.u) == len(self.f)):
            raise ValidationError(f"record length mismatch: y={len(self.y)}, u={len(self.u)}, f={len(self.f)}")

    def __len__(self) -> int:
        return len(self.y)


def gen_fault(spec: FaultSpec, horizon: int) -> np.ndarray:
    if spec.kind != "none" and spec.onset >= horizon:
        raise ValidationError(f"fault onset {spec.onset} must be < horizon {horizon}")
    f = np.zeros(horizon)
    if spec.kind == "none":
        return f
    k = np.arange(horizon - spec.onset, dtype=float)
    if spec.kind == "step":
        f[spec.onset:] = spec.amplitude
    elif spec.kind == "drift":
        f[spec.onset:] = spec.amplitude * k / (horizon - spec.onset)
    else:
        f[spec.onset:] = spec.amplitude * np.sin(spec.omega * k)
    return f


def psd_cholesky(S: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lower-triangular L with L L' = S for positive semidefinite S.

    Zero pivots (within ``tol`` relative to the largest diagonal) leave their
    column at zero, so singular covariances such as Sw = 0 are allowed.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    L = np.zeros_like(S)
    scale = max(float(np.max(np.abs(np.diag(S)))), 1e-300)
    for j in range(n):
        d = S[j, j] - L[j, :j] @ L[j, :j]
        if d < -tol * scale:
            raise ValidationError(f"covariance is not positive semidefinite (pivot {d:.3e} at {j})")
        if d <= tol * scale:
            continue
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    if not np.allclose(L @ L.T, S, atol=1e-9 * scale):
        raise ValidationError("covariance is not positive semidefinite")
    return L


def gen_noise(model: StateSpaceModel, horizon: int, seed) -> NoiseRealization:
    """i.i.d. jointly Gaussian (w, v) with the model's covariances.

    ``seed`` is anything ``numpy.random.default_rng`` accepts, including a
    ``SeedSequence``.
    """
    if model.p != 1:
        raise ValidationError("gen_noise supports scalar outputs only")
    L = psd_cholesky(model.joint_covariance)
    rng = np.random.default_rng(seed)
    e = rng.standard_normal((horizon, model.n + 1))
    wv = e @ L.T
    return NoiseRealization(w=wv[:, :model.n], v=wv[:, model.n].copy(), seed=seed)


def simulate(model: StateSpaceModel, fault: FaultSpec, noise: NoiseRealization,
             u=None, model_id: str = "") -> SimulationRecord:
    """Zero-initial-state response of the plant with an output-additive fault.

    Each input channel (u and every component of w) is pushed through its own
    C(qI-A)^-1 b filter over the shared characteristic polynomial, which is the
    exact zero-state solution of the state recursion.
    """
    N = len(noise)
    if model.m != 1 or model.p != 1:
        raise ValidationError("simulate supports SISO models only")
    u = np.zeros(N) if u is None else np.asarray(u, dtype=float)
    if u.shape != (N,):
        raise ValidationError(f"input length {u.shape} does not match noise length {N}")
    if noise.w.shape != (N, model.n):
        raise ValidationError(f"process noise shape {noise.w.shape} does not match ({N}, {model.n})")
    den, _ = leverrier(model.A)
    y = noise.v.copy()
    if np.any(u):
        y += signal.lfilter(resolvent_numerator(model.C, model.A, model.B[:, 0]), den, u)
    for i in range(model.n):
        if np.any(noise.w[:, i]):
            e_i = np.zeros(model.n)
            e_i[i] = 1.0
            y += signal.lfilter(resolvent_numerator(model.C, model.A, e_i), den, noise.w[:, i])
    f = gen_fault(fault, N)
    y += f
    return SimulationRecord(y=y, u=u, f=f, fault_onset=fault.onset, model_id=model_id)


def simulate_recursive(model: StateSpaceModel, fault: FaultSpec, noise: NoiseRealization,
                       u=None) -> SimulationRecord:
    """Plain state recursion; slow reference for ``simulate``."""
    N = len(noise)
    u = np.zeros(N) if u is None else np.asarray(u, dtype=float)
    x = np.zeros(model.n)
    y = np.empty(N)
    f = gen_fault(fault, N)
    A, b, c = model.A, model.B[:, 0], model.C[0]
    for t in range(N):
        y[t] = c @ x + noise.v[t] + f[t]
        x = A @ x + b * u[t] + noise.w[t]
    return SimulationRecord(y=y, u=u, f=f, fault_onset=fault.onset)


def write_record_csv(record: SimulationRecord, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u", "y", "f"])
        for t in range(len(record)):
            w.writerow([t, repr(float(record.u[t])), repr(float(record.y[t])), repr(float(record.f[t]))])


class IngestionError(ValidationError):
    pass


def read_record_csv(path, fault_onset: int | None = None) -> SimulationRecord:
    """Load a t,u,y[,f] CSV. Missing f is taken as zero; onset defaults to the
    first row with nonzero f (or the record length when f is identically zero)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in ("t", "u", "y") if c not in cols]
        if missing:
            raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
        u, y, f = [], [], []
        for row_no, row in enumerate(reader, start=2):
            try:
                vals = [float(row[c]) for c in ("u", "y")]
                fv = float(row["f"]) if "f" in cols and row["f"] not in (None, "") else 0.0
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"{path}: row {row_no}: cannot parse number ({exc})") from None
            if not (np.all(np.isfinite(vals)) and np.isfinite(fv)):
                raise IngestionError(f"{path}: row {row_no}: NaN or infinite value")
            u.append(vals[0])
            y.append(vals[1])
            f.append(fv)
    f = np.asarray(f)
    if fault_onset is None:
        nz = np.flatnonzero(f)
        fault_onset = int(nz[0]) if nz.size else len(f)
    return SimulationRecord(y=np.asarray(y), u=np.asarray(u), f=f, fault_onset=int(fault_onset),
                            model_id=path.stem)
