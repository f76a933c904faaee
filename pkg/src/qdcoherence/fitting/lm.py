"""Levenberg-Marquardt least squares with box constraints.

Bounds are enforced by the MINUIT-style variable transforms, so the
iteration itself is unconstrained. The Jacobian is numeric (central
differences). Covariance is ``(J^T W J)^-1`` in the external parameters,
scaled by the reduced chi-square.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import FitResult

__all__ = ["nlls_fit", "numeric_jacobian", "propagate", "DegenerateFitError", "PreconditionError"]

_EPS3 = np.finfo(float).eps ** (1.0 / 3.0)


class DegenerateFitError(RuntimeError):
    """Normal matrix is singular for parameters that are not at a bound."""


class PreconditionError(ValueError):
    pass


class _Transform:
    """Maps internal unconstrained u to external p for one parameter."""

    def __init__(self, lo, hi):
        self.lo = -math.inf if lo is None else float(lo)
        self.hi = math.inf if hi is None else float(hi)
        if not self.lo < self.hi:
            raise PreconditionError(f"empty bound interval [{self.lo}, {self.hi}]")
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            self.kind = "box"
        elif math.isfinite(self.lo):
            self.kind = "lower"
        elif math.isfinite(self.hi):
            self.kind = "upper"
        else:
            self.kind = "free"

    def to_ext(self, u):
        if self.kind == "box":
            return self.lo + (self.hi - self.lo) * (math.sin(u) + 1.0) / 2.0
        if self.kind == "lower":
            return self.lo - 1.0 + math.sqrt(u * u + 1.0)
        if self.kind == "upper":
            return self.hi + 1.0 - math.sqrt(u * u + 1.0)
        return u

    def to_int(self, p):
        if self.kind == "box":
            s = 2.0 * (p - self.lo) / (self.hi - self.lo) - 1.0
            return math.asin(min(1.0, max(-1.0, s)))
        if self.kind == "lower":
            return math.sqrt(max((p - self.lo + 1.0) ** 2 - 1.0, 0.0))
        if self.kind == "upper":
            return math.sqrt(max((self.hi - p + 1.0) ** 2 - 1.0, 0.0))
        return p

    def dpdu(self, u):
        if self.kind == "box":
            return (self.hi - self.lo) * math.cos(u) / 2.0
        if self.kind == "lower":
            return u / math.sqrt(u * u + 1.0)
        if self.kind == "upper":
            return -u / math.sqrt(u * u + 1.0)
        return 1.0

    def nudge(self, p):
        """Move a start value sitting exactly on a bound slightly inside."""
        if self.kind == "box":
            step = 1e-6 * (self.hi - self.lo)
        else:
            step = 1e-6 * max(1.0, abs(p))
        return min(max(p, self.lo + step), self.hi - step)

    def u_on_bound(self, u):
        """Internal value of the bound nearest to ``u``."""
        if self.kind == "box":
            return math.pi / 2 + round((u - math.pi / 2) / math.pi) * math.pi
        return 0.0

    def near_bound(self, u, tol=1e-2):
        if self.kind == "free":
            return False
        if self.kind == "box":
            return abs(math.cos(u)) < tol
        return abs(u) < tol


def numeric_jacobian(fun: Callable, p: np.ndarray, rel_step: float = _EPS3, abs_step: Optional[np.ndarray] = None):
    """Central-difference Jacobian of ``fun(p)`` (vector valued)."""
    p = np.asarray(p, dtype=float)
    f0 = np.asarray(fun(p), dtype=float)
    J = np.empty((f0.size, p.size))
    for i in range(p.size):
        h = rel_step * max(abs(p[i]), 1.0) if abs_step is None else abs_step[i]
        pp = p.copy()
        pm = p.copy()
        pp[i] += h
        pm[i] -= h
        J[:, i] = (np.asarray(fun(pp), dtype=float) - np.asarray(fun(pm), dtype=float)) / (pp[i] - pm[i])
    return J


def propagate(fn: Callable, values: np.ndarray, cov: np.ndarray, rel_step: float = 1e-6):
    """First-order error propagation of scalar ``fn(values)``.

    Returns ``(value, sigma)``.
    """
    values = np.asarray(values, dtype=float)
    v0 = float(fn(values))
    grad = np.zeros(values.size)
    for i in range(values.size):
        if cov[i, i] <= 0:
            continue
        h = rel_step * max(abs(values[i]), math.sqrt(cov[i, i]), 1e-12)
        pp = values.copy()
        pm = values.copy()
        pp[i] += h
        pm[i] -= h
        grad[i] = (fn(pp) - fn(pm)) / (2 * h)
    var = float(grad @ cov @ grad)
    return v0, math.sqrt(max(var, 0.0))


def nlls_fit(
    model: Callable,
    x,
    y,
    init: Sequence[float],
    weight=None,
    bounds: Optional[Sequence] = None,
    names: Optional[Sequence[str]] = None,
    fixed: Optional[Sequence[bool]] = None,
    model_name: str = "custom",
    max_iter: int = 500,
    xtol: float = 1e-8,
    gtol: float = 1e-10,
    ftol: float = 1e-10,
    stat_tol: float = 1e-3,
    on_degenerate: str = "raise",
) -> FitResult:
    """Weighted nonlinear least squares ``min sum w (y - model(x, p))^2``.

    ``bounds`` is a sequence of ``(lo, hi)`` pairs (None for open ends).
    ``fixed`` marks parameters held at their initial value. Converges when
    the relative internal step drops below ``xtol`` or the scaled gradient
    below ``gtol`` (gradient relative to the weighted data norm), or when
    three accepted steps in a row lower chi-square by less than ``ftol``
    relative or by less than ``stat_tol`` times the reduced chi-square
    (parameters then move by a few percent of a standard error along a
    flat valley). Parameters sitting on a bound are held there while
    chi-square only decreases beyond it. Otherwise stops after
    ``max_iter`` iterations with ``converged=False``.
    """
    y = np.asarray(y, dtype=float)
    p0 = np.asarray(init, dtype=float).copy()
    n_par = p0.size
    if names is None:
        names = [f"p{i}" for i in range(n_par)]
    names = list(names)
    if len(names) != n_par:
        raise PreconditionError("names and init differ in length")
    if bounds is None:
        bounds = [(None, None)] * n_par
    if len(bounds) != n_par:
        raise PreconditionError("bounds and init differ in length")
    fixed = np.zeros(n_par, bool) if fixed is None else np.asarray(fixed, bool)
    if not np.all(np.isfinite(p0)):
        raise PreconditionError("initial values must be finite")
    w = np.ones_like(y) if weight is None else np.asarray(weight, dtype=float)
    if w.shape != y.shape or np.any(w < 0):
        raise PreconditionError("weights must be non-negative and match y")
    free = np.flatnonzero(~fixed)
    n_free = free.size
    if y.size < n_free + 2:
        raise PreconditionError(f"need at least {n_free + 2} points for {n_free} free parameters, got {y.size}")

    tr = [_Transform(*b) for b in bounds]
    for i, (t, v) in enumerate(zip(tr, p0)):
        if not (t.lo <= v <= t.hi):
            raise PreconditionError(f"initial {names[i]}={v} outside bounds [{t.lo}, {t.hi}]")
        if not fixed[i]:
            p0[i] = t.nudge(v)

    sw = np.sqrt(w)
    ynorm = max(float(np.linalg.norm(sw * y)), 1e-300)

    def ext(u):
        p = p0.copy()
        for k, i in enumerate(free):
            p[i] = tr[i].to_ext(u[k])
        return p

    def resid(u):
        return sw * (y - np.asarray(model(x, ext(u)), dtype=float))

    u = np.array([tr[i].to_int(p0[i]) for i in free], dtype=float)
    r = resid(u)
    chi2 = float(r @ r)
    if not math.isfinite(chi2):
        raise PreconditionError("model is not finite at the initial parameters")

    def fjac(u):
        # derivative of the residual w.r.t. u is minus the model derivative
        return -numeric_jacobian(resid, u)

    lam = 1e-3
    stall = 0
    converged = False
    it = 0
    gnorm = math.inf
    J = fjac(u)
    flags = []
    while it < max_iter:
        if not np.all(np.isfinite(J)):
            flags.append("nonfinite_jacobian")
            break
        it += 1
        A = J.T @ J
        g = J.T @ r
        dA = np.diag(A).copy()
        dmax = dA.max() if dA.size else 1.0
        dA = np.maximum(dA, 1e-12 * max(dmax, 1e-300))
        # parameters pinned at a bound do not count towards the gradient test
        inner = np.array([not tr[i].near_bound(u[k], 1e-2) for k, i in enumerate(free)], dtype=bool)
        gsc = np.abs(g) / (np.sqrt(dA) * ynorm)
        gnorm = float(np.max(gsc[inner])) if inner.any() else 0.0
        if gnorm < gtol or n_free == 0:
            converged = True
            break
        # active set: a parameter on its bound stays there while chi-square
        # only falls beyond the bound; its curvature in u would otherwise
        # inflate the damping for every other parameter
        move = inner.copy()
        for k in np.flatnonzero(~inner):
            move[k] = _downhill_inward(tr[free[k]], free[k], ext(u), chi2, model, x, y, sw)
        if not move.any():
            converged = True
            break
        accepted = False
        while lam < 1e16:
            Am = A[np.ix_(move, move)] + lam * np.diag(dA[move])
            step = np.zeros(n_free)
            try:
                step[move] = np.linalg.solve(Am, g[move])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            u_new = u + step
            r_new = resid(u_new)
            chi2_new = float(r_new @ r_new)
            if math.isfinite(chi2_new) and chi2_new <= chi2:
                accepted = True
                break
            lam *= 10
        if not accepted:
            # no downhill step at machine precision: stationary point
            converged = True
            break
        small = np.linalg.norm(step) < xtol * (np.linalg.norm(u) + xtol)
        dof = max(y.size - n_free, 1)
        stall = stall + 1 if chi2 - chi2_new <= max(ftol, stat_tol / dof) * chi2 else 0
        small |= stall >= 3
        u, r, chi2 = u_new, r_new, chi2_new
        lam = max(lam / 10, 1e-15)
        if small:
            converged = True
            break
        J = fjac(u)

    # parameters held on a bound end exactly on it
    for k, i in enumerate(free):
        if tr[i].near_bound(u[k]) and not _downhill_inward(tr[i], i, ext(u), chi2, model, x, y, sw):
            u_b = u.copy()
            u_b[k] = tr[i].u_on_bound(u[k])
            r_b = resid(u_b)
            chi2_b = float(r_b @ r_b)
            if chi2_b <= chi2:
                u, r, chi2 = u_b, r_b, chi2_b

    p = ext(u)
    dof = max(y.size - n_free, 1)
    chi2_red = chi2 / dof

    # covariance in external coordinates
    cov = np.zeros((n_par, n_par))
    if n_free:
        active = [k for k, i in enumerate(free) if not tr[i].near_bound(u[k])]
        for k, i in enumerate(free):
            if k not in active:
                flags.append(f"at_bound:{names[i]}")
        Ju = numeric_jacobian(lambda uu: sw * np.asarray(model(x, ext(uu)), dtype=float), u)
        dpdu = np.array([tr[i].dpdu(u[k]) for k, i in enumerate(free)])
        Jp = Ju[:, active] / dpdu[active]
        idx = free[active]
        if np.all(np.isfinite(Jp)):
            sub = _invert(Jp.T @ Jp, on_degenerate, flags, [names[free[k]] for k in active])
            cov[np.ix_(idx, idx)] = sub * chi2_red
        else:
            _degenerate(None, on_degenerate, flags, "model is not finite around the solution")
            cov[np.ix_(idx, idx)] = np.nan
        if "degenerate" in flags:
            converged = False

    return FitResult(
        model=model_name,
        names=names,
        values=p,
        covariance=0.5 * (cov + cov.T),
        chi2_red=chi2_red,
        iterations=it,
        converged=converged,
        grad_norm=gnorm if math.isfinite(gnorm) else 0.0,
        flags=flags,
    )


def _downhill_inward(t: "_Transform", i, p, chi2, model, x, y, sw) -> bool:
    """True if nudging parameter ``i`` from its bound into the interior
    lowers chi-square."""
    at_hi = math.isfinite(t.hi) and (not math.isfinite(t.lo) or p[i] > 0.5 * (t.lo + t.hi))
    span = (t.hi - t.lo) if t.kind == "box" else max(1.0, abs(p[i]))
    q = p.copy()
    q[i] += -1e-6 * span if at_hi else 1e-6 * span
    r = sw * (y - np.asarray(model(x, q), dtype=float))
    c = float(r @ r)
    return math.isfinite(c) and c < chi2


def _invert(A, on_degenerate, flags, names):
    """Inverse of the normal matrix.

    Parameters with no measurable influence on the model (zero column) get
    zero variance and an ``unconstrained:<name>`` flag instead of failing
    the whole fit.
    """
    n = A.shape[0]
    out = np.zeros_like(A)
    if n == 0:
        return out
    d = np.sqrt(np.clip(np.diag(A), 0.0, None))
    keep = d > 1e-10 * d.max() if d.max() > 0 else np.zeros(n, bool)
    for nm, k in zip(names, keep):
        if not k:
            flags.append(f"unconstrained:{nm}")
    if not keep.any():
        return _degenerate(A, on_degenerate, flags, "no parameter affects the model")
    Ak = A[np.ix_(keep, keep)]
    dk = d[keep]
    As = Ak / np.outer(dk, dk)
    ev = np.linalg.eigvalsh(As)
    if ev[0] <= 1e-14 * ev[-1]:
        inv = _degenerate(Ak, on_degenerate, flags,
                          f"normal matrix is singular (condition {ev[-1] / max(ev[0], 1e-300):.3g})")
    else:
        inv = np.linalg.inv(As) / np.outer(dk, dk)
    out[np.ix_(keep, keep)] = inv
    return out


def _degenerate(A, on_degenerate, flags, msg):
    if on_degenerate == "raise":
        raise DegenerateFitError(msg)
    flags.append("degenerate")
    return None if A is None else np.linalg.pinv(A)
