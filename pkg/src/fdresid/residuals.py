"""Residual generators and post-filters.

Three residual families are produced from a simulation record:

* output error, ``y - G u`` (a zero-gain observer),
* prediction error, ``H^-1 (y - G u)``, which equals the steady-state Kalman
  innovation,
* either of the above passed through a Butterworth post-filter that
  approximates the ideal frequency selector.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import signal

from .lti import RationalTransferFunction, StateSpaceModel, ValidationError
from .signals import SimulationRecord

DEFAULT_TRANSIENT = 200
RESIDUAL_KINDS = ("OE", "PE", "FilteredOE", "FilteredPE")


class FilterConditioningError(ValidationError):
    pass


@dataclass(frozen=True)
class ResidualSeries:
    values: np.ndarray
    kind: str
    filter_id: str | None = None
    transient: int = DEFAULT_TRANSIENT

    def __post_init__(self):
        if self.kind not in RESIDUAL_KINDS:
            raise ValidationError(f"residual kind must be one of {RESIDUAL_KINDS}, got {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("residual contains non-finite values")
        if not 0 <= self.transient < len(self.values):
            raise ValidationError(f"transient {self.transient} must be in [0, {len(self.values)})")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def steady(self) -> np.ndarray:
        return self.values[self.transient:]


@dataclass(frozen=True)
class FilterSpec:
    shape: str  # "lowpass" | "bandpass"
    order: int = 2
    cutoff: float | None = None
    low: float | None = None
    high: float | None = None

    def __post_init__(self):
        shape = self.shape.lower().replace("-", "").replace("_", "")
        object.__setattr__(self, "shape", shape)
        if int(self.order) != self.order or self.order < 1:
            raise ValidationError(f"filter order must be a positive integer, got {self.order}")
        if shape == "lowpass":
            if self.cutoff is None or not 0 < self.cutoff < np.pi:
                raise ValidationError(f"low-pass cutoff must be in (0, pi), got {self.cutoff}")
        elif shape == "bandpass":
            if self.low is None or self.high is None or not 0 < self.low < self.high < np.pi:
                raise ValidationError(f"band-pass edges must satisfy 0 < low < high < pi, got {self.low}, {self.high}")
        else:
            raise ValidationError(f"filter shape must be lowpass or bandpass, got {self.shape!r}")

    @property
    def label(self) -> str:
        if self.shape == "lowpass":
            return f"LP{self.order}@{self.cutoff:g}"
        return f"BP{self.order}@[{self.low:g},{self.high:g}]"

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "order": self.order}
        if self.shape == "lowpass":
            d["cutoff"] = self.cutoff
        else:
            d.update(low=self.low, high=self.high)
        return d


@dataclass(frozen=True)
class DigitalFilter:
    tf: RationalTransferFunction
    spec: FilterSpec | None = None

    @property
    def label(self) -> str:
        return self.spec.label if self.spec is not None else "custom"

    def settling_length(self, level: float = 0.01, max_len: int = 200_000) -> int:
        """Samples until the impulse response envelope stays below ``level``
        times its peak."""
        n = 1024
        while True:
            imp = np.zeros(n)
            imp[0] = 1.0
            h = np.abs(self.tf.filter(imp))
            above = np.flatnonzero(h > level * h.max())
            last = int(above[-1]) + 1
            if last < n // 2 or n >= max_len:
                return last
            n *= 2


def _default_transient(n: int) -> int:
    return min(DEFAULT_TRANSIENT, max(n - 1, 0))


def residual_oe(record: SimulationRecord, G: RationalTransferFunction) -> ResidualSeries:
    zeta = record.y - G.filter(record.u) if np.any(record.u) else record.y.copy()
    return ResidualSeries(zeta, "OE", transient=_default_transient(len(zeta)))


def residual_pe(record: SimulationRecord, G: RationalTransferFunction,
                H: RationalTransferFunction) -> ResidualSeries:
    Hinv = H.inverse()
    zeta = residual_oe(record, G).values
    return ResidualSeries(Hinv.filter(zeta), "PE", transient=_default_transient(len(zeta)))


def residual_kf_statespace(model: StateSpaceModel, K, record: SimulationRecord) -> ResidualSeries:
    """Innovation of the observer x(t+1) = A x + B u + K (y - C x), x(0) = 0."""
    K = np.asarray(K, dtype=float).reshape(model.n)
    A, b, c = model.A, model.B[:, 0], model.C[0]
    y, u = record.y, record.u
    x = np.zeros(model.n)
    eps = np.empty(len(y))
    for t in range(len(y)):
        eps[t] = y[t] - c @ x
        x = A @ x + b * u[t] + K * eps[t]
    return ResidualSeries(eps, "PE", transient=_default_transient(len(eps)))


def design_butterworth(spec: FilterSpec) -> DigitalFilter:
    """Digital Butterworth via analog prototype and prewarped bilinear map.

    Band-pass filters use ``order`` poles per band edge (total order 2*order).
    Low-pass designs are renormalized to unit DC gain.
    """
    if spec.shape == "lowpass":
        b, a = signal.butter(spec.order, spec.cutoff / np.pi, btype="lowpass")
        b = b * (np.sum(a) / np.sum(b))
        edges = [spec.cutoff]
    else:
        b, a = signal.butter(spec.order, [spec.low / np.pi, spec.high / np.pi], btype="bandpass")
        edges = [spec.low, spec.high]
    filt = DigitalFilter(RationalTransferFunction(b, a), spec)
    if not filt.tf.is_stable():
        raise FilterConditioningError(
            f"{spec.label}: designed filter has poles on/outside the unit circle; reduce the order")
    gains = np.abs(filt.tf(np.asarray(edges)))
    if np.max(np.abs(gains - np.sqrt(0.5))) > 1e-6:
        raise FilterConditioningError(
            f"{spec.label}: band-edge gain {gains} deviates from 1/sqrt(2); reduce the order")
    return filt


def apply_filter(filt: DigitalFilter, series: ResidualSeries) -> ResidualSeries:
    kind = {"OE": "FilteredOE", "PE": "FilteredPE"}.get(series.kind, series.kind)
    out = filt.tf.filter(series.values)
    trans = max(series.transient, DEFAULT_TRANSIENT, filt.settling_length())
    trans = min(trans, len(out) - 1)
    return replace(series, values=out, kind=kind, filter_id=filt.label, transient=trans)


def export_filter(filt: DigitalFilter, path) -> None:
    """Write (b, a) coefficients; JSON when the suffix is .json, otherwise CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    b, a = filt.tf.numerator, filt.tf.denominator
    if path.suffix == ".json":
        payload = {"label": filt.label, "b": b.tolist(), "a": a.tolist()}
        if filt.spec is not None:
            payload["spec"] = filt.spec.to_dict()
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "b", "a"])
        for k in range(max(len(b), len(a))):
            w.writerow([k, repr(float(b[k])) if k < len(b) else "0.0",
                        repr(float(a[k])) if k < len(a) else "0.0"])


def frequency_response_rows(tf: RationalTransferFunction, grid) -> list[tuple[float, float, float]]:
    resp = tf(np.asarray(grid, dtype=float))
    return [(float(w), float(abs(r)), float(np.angle(r))) for w, r in zip(grid, resp)]


def write_frequency_response(tf: RationalTransferFunction, grid, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "magnitude", "phase"])
        for row in frequency_response_rows(tf, grid):
            w.writerow([f"{x:.12g}" for x in row])
