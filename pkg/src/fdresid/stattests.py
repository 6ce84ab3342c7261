"""Residual evaluation functions, thresholds, decision logic and indicators.

Confidence convention: ``alpha`` is the confidence level, so a threshold is
the quantile exceeded with probability ``1 - alpha`` under the null.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .lti import ValidationError
from .residuals import ResidualSeries


@dataclass(frozen=True)
class EvalSeries:
    """Evaluation-function values; ``values[i]`` belongs to sample ``offset + i``."""

    values: np.ndarray
    offset: int = 0
    kind: str = ""


@dataclass(frozen=True)
class Threshold:
    value: float
    alpha: float
    family: str  # "chi2" | "fisher"
    dof: int | None = None
    p: int | None = None
    N: int | None = None

    def rederive(self) -> float:
        if self.family == "chi2":
            return chi2_quantile(self.dof, self.alpha)
        return t2_threshold(self.p, self.N, self.alpha).value


@dataclass(frozen=True)
class DetectionOutcome:
    alarms: np.ndarray
    fault_onset: int
    fdr: float
    far: float
    mt2d: float
    detected: bool


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")


def _as_2d(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return r[:, None] if r.ndim == 1 else r


def _safe_inverse(S, name: str) -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] != S.shape[1]:
        raise ValidationError(f"{name} must be square")
    eig = np.linalg.eigvalsh(0.5 * (S + S.T))
    if eig.min() <= 1e-14 * max(1.0, abs(eig.max())):
        raise ValidationError(f"{name} is singular or not positive definite")
    return np.linalg.inv(S)


def _quadratic_form(r: np.ndarray, Sinv: np.ndarray) -> np.ndarray:
    return np.einsum("ti,ij,tj->t", r, Sinv, r)


def eval_jkf(eps, lam, s: int) -> EvalSeries:
    """Windowed chi-square statistic sum_{k=0..s} eps(t-k)' lam^-1 eps(t-k), t >= s."""
    values = eps.values if isinstance(eps, ResidualSeries) else eps
    r = _as_2d(values)
    if s < 0 or len(r) <= s:
        raise ValidationError(f"need len(eps) > s >= 0, got len={len(r)}, s={s}")
    q = _quadratic_form(r, _safe_inverse(lam, "lambda"))
    # direct windowed sums; cumsum differencing loses relative accuracy on quiet stretches
    j = q if s == 0 else np.convolve(q, np.ones(s + 1), mode="valid")
    return EvalSeries(j, offset=s, kind="jkf")


def estimate_moments(r: ResidualSeries, min_length: int = 100) -> tuple[np.ndarray, np.ndarray]:
    data = _as_2d(r.steady if isinstance(r, ResidualSeries) else r)
    if len(data) < min_length:
        raise ValidationError(f"need at least {min_length} post-transient samples, got {len(data)}")
    mu = data.mean(axis=0)
    S = np.atleast_2d(np.cov(data, rowvar=False, ddof=1))
    if np.min(np.linalg.eigvalsh(S)) <= 1e-14 * max(1.0, float(np.max(np.abs(mu)))) ** 2:
        raise ValidationError("residual covariance is degenerate (zero variance)")
    return mu, S


def eval_t2(r, mu, S) -> EvalSeries:
    values = r.values if isinstance(r, ResidualSeries) else r
    x = _as_2d(values) - np.asarray(mu, dtype=float).reshape(1, -1)
    return EvalSeries(_quadratic_form(x, _safe_inverse(S, "S")), offset=0, kind="t2")


def _invert_cdf(cdf, pdf, target: float, lo: float, hi: float, x0: float,
                rtol: float = 1e-15, max_iter: int = 200) -> float:
    """Safeguarded Newton: Newton steps that leave the bracket fall back to bisection."""
    x = min(max(x0, lo), hi)
    for _ in range(max_iter):
        err = cdf(x) - target
        if err > 0:
            hi = x
        else:
            lo = x
        d = pdf(x)
        x_new = x - err / d if d > 0 and np.isfinite(d) else np.nan
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rtol * abs(x_new) or hi - lo <= rtol * hi:
            return float(x_new)
        x = x_new
    return float(x)


def chi2_quantile(dof: float, alpha: float) -> float:
    """x with P(chi2(dof) <= x) = alpha via the regularized lower incomplete gamma."""
    if dof <= 0:
        raise ValidationError(f"dof must be positive, got {dof}")
    _check_alpha(alpha)
    k = 0.5 * dof
    cdf = lambda x: special.gammainc(k, 0.5 * x)
    pdf = lambda x: np.exp((k - 1) * np.log(0.5 * x) - 0.5 * x - special.gammaln(k)) * 0.5 if x > 0 else 0.0
    # Wilson-Hilferty starting point
    z = np.sqrt(2.0) * special.erfinv(2 * alpha - 1)
    h = 2.0 / (9.0 * dof)
    x0 = max(dof * (1 - h + z * np.sqrt(h)) ** 3, 1e-300)
    hi = max(2 * x0, 1.0)
    while cdf(hi) < alpha:
        hi *= 2
    return _invert_cdf(cdf, pdf, alpha, 0.0, hi, x0)


def f_quantile(d1: float, d2: float, alpha: float) -> float:
    """x with P(F(d1, d2) <= x) = alpha via the regularized incomplete beta.

    Solved in the beta variable b = d1 x / (d1 x + d2), then mapped back.
    """
    if d1 <= 0 or d2 <= 0:
        raise ValidationError(f"F degrees of freedom must be positive, got {d1}, {d2}")
    _check_alpha(alpha)
    a, b_ = 0.5 * d1, 0.5 * d2
    lbeta = special.betaln(a, b_)
    cdf = lambda b: special.betainc(a, b_, b)

    def pdf(b):
        if b <= 0 or b >= 1:
            return 0.0
        return np.exp((a - 1) * np.log(b) + (b_ - 1) * np.log1p(-b) - lbeta)

    # start from the chi-square limit d1 F -> chi2(d1)
    xc = chi2_quantile(d1, alpha) / d1
    b0 = d1 * xc / (d1 * xc + d2)
    b = _invert_cdf(cdf, pdf, alpha, 0.0, 1.0, b0)
    return d2 * b / (d1 * (1.0 - b))


def chi2_threshold(dof: int, alpha: float) -> Threshold:
    if dof < 1:
        raise ValidationError(f"dof must be >= 1, got {dof}")
    return Threshold(chi2_quantile(dof, alpha), alpha, "chi2", dof=int(dof))


def t2_threshold(p: int, N: int, alpha: float) -> Threshold:
    """p (N^2 - 1) / (N (N - p)) * F_alpha(p, N - p)."""
    if p < 1 or N <= p:
        raise ValidationError(f"need N > p >= 1, got p={p}, N={N}")
    scale = p * (N * N - 1.0) / (N * (N - p))
    return Threshold(scale * f_quantile(p, N - p, alpha), alpha, "fisher", p=int(p), N=int(N))


def decide(evals: EvalSeries, th: Threshold) -> np.ndarray:
    """Alarm where the evaluation reaches the threshold (equality counts as faulty)."""
    return np.asarray(evals.values) >= th.value


def indicators(alarms, fault_onset: int, eval_start: int = 0, offset: int = 0) -> DetectionOutcome:
    """Detection indicators from an alarm sequence.

    ``alarms[i]`` belongs to sample ``offset + i``. FAR is the alarm fraction on
    [eval_start, fault_onset), FDR on [fault_onset, end). MT2D counts from 1 at
    the onset sample and is NaN when no post-onset alarm occurs.
    """
    alarms = np.asarray(alarms, dtype=bool)
    end = offset + len(alarms)
    if not offset <= eval_start < fault_onset < end:
        raise ValidationError(
            f"need offset <= eval_start < fault_onset < end, got {offset}, {eval_start}, {fault_onset}, {end}")
    pre = alarms[eval_start - offset:fault_onset - offset]
    post = alarms[fault_onset - offset:]
    far = float(pre.mean())
    fdr = float(post.mean())
    hits = np.flatnonzero(post)
    detected = bool(hits.size)
    mt2d = float(hits[0] + 1) if detected else float("nan")
    return DetectionOutcome(alarms=alarms, fault_onset=fault_onset, fdr=fdr, far=far, mt2d=mt2d, detected=detected)
