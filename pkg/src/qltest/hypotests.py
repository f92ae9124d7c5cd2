"""Test statistics for the simple null H0: theta = theta0.

The headline statistic is n times the empirical L2-distance between the
per-observation quasi-loglikelihood terms at the fitted and the null
parameter.  Competitors: quasi-likelihood ratio, Wald, Rao score and two
phi-divergences (approximate Kullback-Leibler and the Balakrishnan-
Sanghvi ratio), plus the stepwise diffusion-then-drift pair.  All are
calibrated against chi-square limits or an empirical threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import chi2_cdf, chi2_quantile, noncentral_chi2_cdf
from .errors import ConfigError, RaoUndefinedError, StatisticError
from .models import ParamVector
from .quasilik import InfoMatrix, QLContext, observed_info, ql_grad, ql_terms

__all__ = [
    "STATISTIC_KINDS",
    "TestReport",
    "empirical_l2_distance",
    "t_statistic",
    "gqlrt_statistic",
    "wald_statistic",
    "rao_statistic",
    "phi_divergence_statistic",
    "stepwise_beta",
    "stepwise_alpha",
    "power_approximation",
    "report_csv_header",
    "report_csv_row",
]

STATISTIC_KINDS = ("T", "GQLRT", "WALD", "RAO", "AKL", "BS", "STEP_BETA", "STEP_ALPHA")

# kinds whose null law is chi-square, so an asymptotic p-value exists
_CHI2_CALIBRATED = {"T", "GQLRT", "WALD", "RAO", "AKL", "STEP_BETA", "STEP_ALPHA"}

_LOG_RATIO_CAP = 300.0


@dataclass(frozen=True)
class TestReport:
    kind: str
    statistic: float
    df: int
    threshold: float
    p_value: float  # nan when no asymptotic calibration exists (BS)
    reject: bool
    theta_hat: Optional[ParamVector]
    theta_null: Optional[ParamVector]
    saturated_terms: int = 0


def _finish(kind, stat, df, level, threshold, theta_hat, theta_null, saturated=0):
    if not math.isfinite(stat):
        raise StatisticError(f"{kind} statistic is non-finite")
    if threshold is None:
        if kind not in _CHI2_CALIBRATED:
            raise ConfigError(f"{kind} has no asymptotic calibration; supply an empirical threshold")
        threshold = chi2_quantile(1.0 - level, df)
    p_value = 1.0 - chi2_cdf(stat, df) if kind in _CHI2_CALIBRATED else math.nan
    return TestReport(
        kind=kind,
        statistic=float(stat),
        df=df,
        threshold=float(threshold),
        p_value=p_value,
        reject=bool(stat > threshold),
        theta_hat=theta_hat,
        theta_null=theta_null,
        saturated_terms=saturated,
    )


def empirical_l2_distance(ctx: QLContext, theta1: ParamVector, theta2: ParamVector) -> float:
    """Mean squared difference of per-observation terms; symmetric, >= 0."""
    ctx.model.check_theta(theta1)
    ctx.model.check_theta(theta2)
    diff = ql_terms(ctx, theta1) - ql_terms(ctx, theta2)
    return float(np.mean(diff * diff))


def _rate_sqrt(ctx: QLContext) -> np.ndarray:
    """diag of phi(n)^{-1/2}: sqrt(n delta) for alpha, sqrt(n) for beta."""
    n, delta = ctx.path.n, ctx.path.delta
    m1, m2 = ctx.model.m1, ctx.model.m2
    return np.concatenate(
        [np.full(m1, math.sqrt(n * delta)), np.full(m2, math.sqrt(n))]
    )


def t_statistic(ctx, theta_hat, theta0, level=0.05, threshold=None) -> TestReport:
    """n times the empirical L2-distance between fitted and null terms."""
    stat = ctx.path.n * empirical_l2_distance(ctx, theta_hat, theta0)
    df = ctx.model.m1 + ctx.model.m2
    return _finish("T", stat, df, level, threshold, theta_hat, theta0)


def gqlrt_statistic(ctx, theta_hat, theta0, level=0.05, threshold=None) -> TestReport:
    """Quasi-likelihood ratio, oriented to be nonnegative at the minimizer."""
    stat = 2.0 * float(
        np.sum(ql_terms(ctx, theta0)) - np.sum(ql_terms(ctx, theta_hat))
    )
    df = ctx.model.m1 + ctx.model.m2
    return _finish("GQLRT", stat, df, level, threshold, theta_hat, theta0)


def wald_statistic(ctx, theta_hat, theta0, level=0.05, threshold=None) -> TestReport:
    """Rate-scaled quadratic form in (theta_hat - theta0)."""
    info = observed_info(ctx, theta_hat).full()
    if not np.all(np.isfinite(info)):
        raise StatisticError("observed information is non-finite")
    z = _rate_sqrt(ctx) * (theta_hat.full - theta0.full)
    stat = float(z @ info @ z)
    df = ctx.model.m1 + ctx.model.m2
    return _finish("WALD", stat, df, level, threshold, theta_hat, theta0)


def rao_statistic(ctx, theta_hat, theta0, level=0.05, threshold=None) -> TestReport:
    """Score statistic; theta_hat enters only through the information."""
    info = observed_info(ctx, theta_hat).full()
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > 1e12:
        raise RaoUndefinedError("observed information matrix is singular")
    score = ql_grad(ctx, theta0) / _rate_sqrt(ctx)
    stat = float(score @ np.linalg.solve(info, score))
    df = ctx.model.m1 + ctx.model.m2
    return _finish("RAO", stat, df, level, threshold, theta_hat, theta0)


def _phi_ratios(ctx, theta_hat, theta0, cap=_LOG_RATIO_CAP):
    logr = ql_terms(ctx, theta0) - ql_terms(ctx, theta_hat)
    saturated = int(np.sum(np.abs(logr) > cap))
    logr = np.clip(logr, -cap, cap)
    return logr, np.exp(logr), saturated


def phi_divergence_statistic(
    ctx, theta_hat, theta0, phi_kind, level=0.05, threshold=None
) -> TestReport:
    """2 * sum phi(r_i) with per-observation quasi-likelihood ratios r_i.

    AKL: phi(x) = 1 - x + x log x (chi-square calibrated).
    BS:  phi(x) = ((x - 1)/(x + 1))^2 (empirical threshold only).
    """
    kind = phi_kind.upper()
    if kind not in ("AKL", "BS"):
        raise ConfigError(f"unknown phi-divergence kind {phi_kind!r}")
    logr, r, saturated = _phi_ratios(ctx, theta_hat, theta0)
    if kind == "AKL":
        vals = 1.0 - r + r * logr
    else:
        vals = ((r - 1.0) / (r + 1.0)) ** 2
    stat = 2.0 * float(np.sum(vals))
    df = ctx.model.m1 + ctx.model.m2
    return _finish(kind, stat, df, level, threshold, theta_hat, theta0, saturated)


def stepwise_beta(ctx, beta_tilde, beta0, level=0.05, threshold=None) -> TestReport:
    """First-stage test of the diffusion block against beta0."""
    model = ctx.model
    path = ctx.path
    xprev = path.values[:-1]
    dx2 = np.diff(path.values) ** 2
    alpha_c = model.box.center()[: model.m1]
    c_tilde = np.asarray(
        model.diffsq(ParamVector(alpha_c, beta_tilde), xprev), dtype=float
    )
    c_0 = np.asarray(model.diffsq(ParamVector(alpha_c, beta0), xprev), dtype=float)
    if np.any(c_tilde <= 0) or np.any(c_0 <= 0):
        raise StatisticError("nonpositive diffusion coefficient in stepwise test")
    terms = dx2 / path.delta * (1.0 / c_tilde - 1.0 / c_0) + np.log(c_tilde / c_0)
    stat = float(np.sum(terms * terms))
    theta_tilde = ParamVector(alpha_c, beta_tilde)
    theta_null = ParamVector(alpha_c, beta0)
    return _finish("STEP_BETA", stat, model.m2, level, threshold, theta_tilde, theta_null)


def stepwise_alpha(ctx, alpha_tilde, alpha0, beta_tilde, level=0.05, threshold=None) -> TestReport:
    """Second-stage test of the drift block at the pre-estimated beta."""
    model = ctx.model
    theta_tilde = ParamVector(alpha_tilde, beta_tilde)
    theta_null = ParamVector(alpha0, beta_tilde)
    diff = ql_terms(ctx, theta_tilde) - ql_terms(ctx, theta_null)
    stat = float(np.sum(diff * diff))
    return _finish("STEP_ALPHA", stat, model.m1, level, threshold, theta_tilde, theta_null)


def power_approximation(h, info: InfoMatrix, level: float, df: int) -> float:
    """Local-alternative power: 1 - F_nc(chi2 quantile) at lambda = h'Ih."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    lam = float(h @ info.full() @ h)
    if lam < 0.0:
        # numerically indefinite information; clip to the null case
        lam = 0.0
    crit = chi2_quantile(1.0 - level, df)
    return 1.0 - noncentral_chi2_cdf(crit, df, lam)


def report_csv_header() -> str:
    return "kind,n,delta,statistic,df,threshold,p_value,reject"


def report_csv_row(report: TestReport, n: int, delta: float) -> str:
    return ",".join(
        [
            report.kind,
            str(n),
            repr(float(delta)),
            repr(report.statistic),
            str(report.df),
            repr(report.threshold),
            "nan" if math.isnan(report.p_value) else repr(report.p_value),
            "true" if report.reject else "false",
        ]
    )
