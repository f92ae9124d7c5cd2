"""Second-order quasi-loglikelihood of a discretely observed diffusion.

The per-observation term (negative log of the corrected local-Gaussian
transition approximation, additive constant dropped) is

    l_i(theta) = (X_i - r1)^2 / (2 delta c) * (1 + delta d1)
               + (log c + delta e1) / 2

with r1, d1, e1 evaluated at X_{i-1}.  The estimator minimizes the sum.
All theta-derivatives are central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, DomainError
from .models import Model, ParamVector

__all__ = [
    "QLContext",
    "InfoMatrix",
    "ql_terms",
    "ql_term",
    "ql_total",
    "ql_grad",
    "ql_hess",
    "observed_info",
    "fisher_info",
    "fd_gradient",
    "fd_hessian",
]

FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class QLContext:
    """A model bound to the path it is evaluated on."""

    model: Model
    path: "SamplePath"

    def __post_init__(self):
        self.model.check_domain(self.path.values)


def _pieces(ctx: QLContext, theta: ParamVector):
    """Vectorized b, c, gamma2 at the left endpoints X_0 .. X_{n-1}."""
    model = ctx.model
    xprev = ctx.path.values[:-1]
    b = np.asarray(model.drift(theta, xprev), dtype=float)
    sig = np.asarray(model.diff(theta, xprev), dtype=float)
    c = sig * sig
    if np.any(c <= 0.0) or not np.all(np.isfinite(c)):
        raise DomainError("diffusion coefficient c must be positive and finite on the path")
    dc = np.asarray(model.diffsq_dx(theta, xprev), dtype=float)
    d2c = np.asarray(model.diffsq_dxx(theta, xprev), dtype=float)
    db = np.asarray(model.drift_dx(theta, xprev), dtype=float)
    g2 = 0.5 * (b * dc + 2.0 * c * db) + 0.25 * c * d2c
    return xprev, b, c, g2


def ql_terms(ctx: QLContext, theta: ParamVector) -> np.ndarray:
    """All per-observation terms l_i(theta), i = 1..n, as an array."""
    delta = ctx.path.delta
    xprev, b, c, g2 = _pieces(ctx, theta)
    d1 = -g2 / c
    resid = ctx.path.values[1:] - (xprev + delta * b)
    return resid * resid / (2.0 * delta * c) * (1.0 + delta * d1) + 0.5 * (
        np.log(c) - delta * d1
    )


def ql_term(ctx: QLContext, theta: ParamVector, i: int) -> float:
    """Single term l_i(theta) for 1 <= i <= n."""
    if not 1 <= i <= ctx.path.n:
        raise IndexError(f"observation index {i} outside 1..{ctx.path.n}")
    return float(ql_terms(ctx, theta)[i - 1])


def ql_total(ctx: QLContext, theta: ParamVector) -> float:
    """Quasi-loglikelihood l_n(theta) = sum_i l_i(theta) (minimized)."""
    return float(np.sum(ql_terms(ctx, theta)))


def _steps(x: np.ndarray, rel_step: float) -> np.ndarray:
    return rel_step * np.maximum(1.0, np.abs(x))


def _check_interior(x, h, lower, upper):
    if lower is not None:
        bad = np.where(x - h < lower)[0]
        if bad.size:
            raise BoundaryError(
                f"coordinate {bad[0]} within a finite-difference step of the lower bound",
                coordinate=int(bad[0]),
            )
    if upper is not None:
        bad = np.where(x + h > upper)[0]
        if bad.size:
            raise BoundaryError(
                f"coordinate {bad[0]} within a finite-difference step of the upper bound",
                coordinate=int(bad[0]),
            )


def fd_gradient(f, x, lower=None, upper=None, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference gradient with per-coordinate step rel_step*max(1,|x_j|)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    _check_interior(x, h, lower, upper)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h[j])
    return g


def fd_hessian(f, x, lower=None, upper=None, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference Hessian, symmetrized as (H + H') / 2."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    _check_interior(x, h, lower, upper)
    d = x.size
    H = np.empty((d, d))
    f0 = f(x)
    for j in range(d):
        ej = np.zeros_like(x)
        ej[j] = h[j]
        H[j, j] = (f(x + ej) + f(x - ej) - 2.0 * f0) / (h[j] * h[j])
        for k in range(j + 1, d):
            ek = np.zeros_like(x)
            ek[k] = h[k]
            H[j, k] = (
                f(x + ej + ek) - f(x + ej - ek) - f(x - ej + ek) + f(x - ej - ek)
            ) / (4.0 * h[j] * h[k])
            H[k, j] = H[j, k]
    return 0.5 * (H + H.T)


def _objective(ctx: QLContext):
    m1, m2 = ctx.model.m1, ctx.model.m2

    def f(v):
        return ql_total(ctx, ParamVector.from_full(v, m1, m2))

    return f


def ql_grad(ctx: QLContext, theta: ParamVector) -> np.ndarray:
    """Finite-difference gradient of ql_total at theta."""
    box = ctx.model.box
    return fd_gradient(_objective(ctx), theta.full, box.lower, box.upper)


def ql_hess(ctx: QLContext, theta: ParamVector) -> np.ndarray:
    """Finite-difference Hessian of ql_total at theta (symmetrized)."""
    box = ctx.model.box
    return fd_hessian(_objective(ctx), theta.full, box.lower, box.upper)


@dataclass(frozen=True)
class InfoMatrix:
    """Rate-normalized information blocks.

    block_aa carries the 1/(n delta) rate, block_ab 1/(n sqrt(delta)),
    block_bb 1/n; full() reassembles the symmetric matrix.
    """

    block_aa: np.ndarray
    block_ab: np.ndarray
    block_bb: np.ndarray

    def full(self) -> np.ndarray:
        top = np.hstack([self.block_aa, self.block_ab])
        bottom = np.hstack([self.block_ab.T, self.block_bb])
        return np.vstack([top, bottom])


def observed_info(ctx: QLContext, theta: ParamVector) -> InfoMatrix:
    """Observed information: the ql Hessian with block rate scalings."""
    m1 = ctx.model.m1
    n, delta = ctx.path.n, ctx.path.delta
    H = ql_hess(ctx, theta)
    return InfoMatrix(
        block_aa=H[:m1, :m1] / (n * delta),
        block_ab=H[:m1, m1:] / (n * np.sqrt(delta)),
        block_bb=H[m1:, m1:] / n,
    )


def fisher_info(ctx: QLContext, theta: ParamVector, rel_step: float = FD_REL_STEP) -> InfoMatrix:
    """Empirical Fisher information (block-diagonal by construction).

    Drift block: (1/n) sum d_a b d_a b' / c; diffusion block:
    (1/2n) sum d_b c d_b c' / c^2, with parameter derivatives by central
    finite differences on b and c along the path.
    """
    model = ctx.model
    m1, m2 = model.m1, model.m2
    xprev = ctx.path.values[:-1]
    c = np.asarray(model.diffsq(theta, xprev), dtype=float)

    ha = _steps(theta.alpha, rel_step)
    db = np.empty((m1, xprev.size))
    for j in range(m1):
        e = np.zeros(m1)
        e[j] = ha[j]
        db[j] = (
            np.asarray(model.drift(theta.replace_alpha(theta.alpha + e), xprev), dtype=float)
            - np.asarray(model.drift(theta.replace_alpha(theta.alpha - e), xprev), dtype=float)
        ) / (2.0 * ha[j])

    hb = _steps(theta.beta, rel_step)
    dcb = np.empty((m2, xprev.size))
    for j in range(m2):
        e = np.zeros(m2)
        e[j] = hb[j]
        dcb[j] = (
            np.asarray(model.diffsq(theta.replace_beta(theta.beta + e), xprev), dtype=float)
            - np.asarray(model.diffsq(theta.replace_beta(theta.beta - e), xprev), dtype=float)
        ) / (2.0 * hb[j])

    block_aa = (db / c) @ db.T / xprev.size
    block_bb = 0.5 * (dcb / c**2) @ dcb.T / xprev.size
    return InfoMatrix(
        block_aa=block_aa,
        block_ab=np.zeros((m1, m2)),
        block_bb=block_bb,
    )
