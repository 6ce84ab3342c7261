"""Power spectra and the fault-to-noise performance index.

Spectra are two-sided densities sampled on [0, pi] and normalized so that
(1/pi) * integral_0^pi Phi(w) dw is the signal variance; unit white noise has
Phi == 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .lti import RationalTransferFunction, ValidationError
from .residuals import ResidualSeries

GRID_POINTS = 4096
TIE_RTOL = 1e-12


class DegenerateInputError(ValidationError):
    pass


def default_grid(points: int = GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, np.pi, points)


@dataclass(frozen=True)
class Spectrum:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1 or g.size < 2:
            raise ValidationError("spectrum grid and values must be equal-length 1-D arrays")
        if np.any(np.diff(g) <= 0):
            raise ValidationError("spectrum grid must be strictly ascending")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError("spectrum values must be finite and nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def power(self) -> float:
        """Variance implied by the spectrum."""
        return float(np.trapezoid(self.values, self.grid) / np.pi)

    def scaled(self, weight) -> "Spectrum":
        return Spectrum(self.grid, self.values * np.asarray(weight, dtype=float))

    def filtered(self, tf: RationalTransferFunction) -> "Spectrum":
        return self.scaled(np.abs(tf(self.grid)) ** 2)


@dataclass(frozen=True)
class PerfIndexReport:
    j_time: float
    j_freq: float
    omega0: float
    j_opt: float
    method_id: str


def _same_grid(a: Spectrum, b: Spectrum) -> None:
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise ValidationError("spectra must share the same frequency grid")


def analytic_disturbance_spectrum(H: RationalTransferFunction, lam, grid=None) -> Spectrum:
    """|H(e^jw)|^2 * lambda."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    lam = float(np.asarray(lam).reshape(-1)[0])
    return Spectrum(grid, np.abs(H(grid)) ** 2 * lam)


def estimate_spectrum(x, grid=None, nperseg: int | None = None, detrend=False) -> Spectrum:
    """Welch-averaged periodogram (Hann window, 50 % overlap) on ``grid``.

    No detrending by default so that step and drift faults keep their
    low-frequency content.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1024:
        raise ValidationError(f"estimate_spectrum needs a 1-D signal of length >= 1024, got {x.shape}")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if nperseg is None:
        nperseg = min(4096, 1 << int(np.log2(x.size // 2)))
    nperseg = int(min(nperseg, x.size))
    if nperseg % 2:
        nperseg -= 1
    freqs, pxx = signal.welch(x, fs=2 * np.pi, window="hann", nperseg=nperseg,
                              detrend=detrend, return_onesided=False, scaling="density")
    # two-sided FFT ordering: [0 .. pi) then the Nyquist bin labelled -pi
    half = nperseg // 2
    f = np.concatenate([freqs[:half], [np.pi]])
    phi = 2 * np.pi * np.concatenate([pxx[:half], [pxx[half]]])
    return Spectrum(grid, np.maximum(np.interp(grid, f, phi), 0.0))


def perf_index_time(r_faulty, r_normal) -> float:
    """Ratio of mean-square values of a faulty and a fault-free residual."""
    rf = r_faulty.steady if isinstance(r_faulty, ResidualSeries) else np.asarray(r_faulty, dtype=float)
    rn = r_normal.steady if isinstance(r_normal, ResidualSeries) else np.asarray(r_normal, dtype=float)
    if rf.size == 0 or rn.size == 0:
        raise ValidationError("perf_index_time needs nonempty residuals")
    pn = float(np.mean(rn ** 2))
    if pn == 0:
        raise DegenerateInputError("fault-free residual has zero power")
    return float(np.mean(rf ** 2)) / pn


def perf_index_freq(phi_fault: Spectrum, phi_dist: Spectrum) -> float:
    _same_grid(phi_fault, phi_dist)
    den = np.trapezoid(phi_dist.values, phi_dist.grid)
    if den <= 0:
        raise DegenerateInputError("disturbance spectrum integrates to zero")
    return float(np.trapezoid(phi_fault.values, phi_fault.grid) / den) + 1.0


def optimal_frequency(phi_fault: Spectrum, phi_dist: Spectrum, rtol: float = TIE_RTOL) -> tuple[float, float]:
    """Frequency maximizing the fault-to-disturbance spectral ratio.

    Ratios within ``rtol`` of the maximum count as ties; the smallest such
    frequency is returned.
    """
    _same_grid(phi_fault, phi_dist)
    if np.any(phi_dist.values <= 0):
        raise ValidationError("disturbance spectrum has zeros on the grid")
    ratio = phi_fault.values / phi_dist.values
    best = ratio.max()
    i = int(np.flatnonzero(ratio >= best * (1 - rtol))[0])
    return float(phi_fault.grid[i]), float(ratio[i] + 1.0)


def band_integral(grid: np.ndarray, values: np.ndarray, lo: float, hi: float) -> float:
    """Trapezoidal integral over [lo, hi] with linear interpolation at the edges."""
    if lo < grid[0] or hi > grid[-1] or not lo < hi:
        raise ValidationError(f"band [{lo}, {hi}] not covered by grid [{grid[0]}, {grid[-1]}]")
    inner = (grid > lo) & (grid < hi)
    x = np.concatenate([[lo], grid[inner], [hi]])
    y = np.concatenate([[np.interp(lo, grid, values)], values[inner], [np.interp(hi, grid, values)]])
    return float(np.trapezoid(y, x))


def band_limited_indices(phi_f: Spectrum, phi_v: Spectrum, H: RationalTransferFunction,
                       band_edge: float) -> tuple[float, float]:
    """Indices of ideally low-passed OE and PE residuals over [0, band_edge].

    Returns ``(j_oef, j_pef)`` where the PE variant weights both spectra by
    |H^-1|^2 before integrating.
    """
    _same_grid(phi_f, phi_v)
    if not 0 < band_edge <= np.pi:
        raise ValidationError(f"band_edge must be in (0, pi], got {band_edge}")
    g = phi_f.grid
    w = 1.0 / np.abs(H(g)) ** 2
    num_oe = band_integral(g, phi_f.values, 0.0, band_edge)
    den_oe = band_integral(g, phi_v.values, 0.0, band_edge)
    num_pe = band_integral(g, w * phi_f.values, 0.0, band_edge)
    den_pe = band_integral(g, w * phi_v.values, 0.0, band_edge)
    if den_oe <= 0 or den_pe <= 0:
        raise DegenerateInputError("disturbance spectrum has no power in the band")
    return num_oe / den_oe + 1.0, num_pe / den_pe + 1.0


def write_spectrum_csv(spectra: dict[str, Spectrum], path) -> None:
    """One omega column plus one column per named spectrum."""
    names = list(spectra)
    grid = spectra[names[0]].grid
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", *names])
        for i, om in enumerate(grid):
            w.writerow([f"{om:.12g}", *(f"{spectra[n].values[i]:.12g}" for n in names)])
