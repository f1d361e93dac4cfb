"""Locating the optimal replenishment barrier.

The barrier selector M is continuous, negative below its unique root and
positive above it, so a doubling bracket expansion from [-1, 1] always finds
a sign change; the root is then polished by scipy's brentq (secant/inverse
quadratic with bisection fallback - derivative free, since M' would need
another quadrature).  For quadratic cost the root has a closed form used as
a cross-check, and as the observation rate grows the barrier converges to
the continuous-monitoring barrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.optimize import brentq

from .levy_model import ProblemSpec, kappa_prime, validate
from .scale_kernel import kernel_pair
from .valuation import DEFAULT_QUAD, QuadratureConfig, m_func, value, _poly_exp_tail

__all__ = [
    "SolveResult",
    "SweepRow",
    "solve_bstar",
    "bstar_quadratic_closed_form",
    "classical_bstar",
    "classical_m",
    "sweep",
    "sweep_flags",
]

_BRACKET_CAP = 1e6


@dataclass(frozen=True)
class SolveResult:
    b_star: float
    residual: float
    bracket: tuple
    iterations: int
    closed_form_available: bool
    closed_form_value: float | None

    def to_dict(self) -> dict:
        return {"b_star": self.b_star, "residual": self.residual,
                "bracket": list(self.bracket), "iterations": self.iterations,
                "closed_form_available": self.closed_form_available,
                "closed_form_value": self.closed_form_value}


def _expand_bracket(fn, cap=_BRACKET_CAP):
    lo, hi = -1.0, 1.0
    f_lo, f_hi = fn(lo), fn(hi)
    n = 2
    while f_lo > 0.0 and lo > -cap:
        lo *= 2.0
        f_lo = fn(lo)
        n += 1
    while f_hi < 0.0 and hi < cap:
        hi *= 2.0
        f_hi = fn(hi)
        n += 1
    if f_lo > 0.0 or f_hi < 0.0:
        raise RuntimeError(
            f"no sign change within |b| <= {cap:g}; an upstream assumption is violated")
    return lo, hi, n


def solve_bstar(spec: ProblemSpec, cfg: QuadratureConfig = DEFAULT_QUAD) -> SolveResult:
    """Unique root of the barrier selector M."""
    spec.require_validated()
    fn = lambda b: m_func(spec, b, cfg)
    lo, hi, n_bracket = _expand_bracket(fn)
    root, info = brentq(fn, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=200, full_output=True)
    res = abs(fn(root))
    closed = spec.cost.kind == "quadratic"
    return SolveResult(
        b_star=float(root), residual=res, bracket=(lo, hi),
        iterations=n_bracket + info.iterations,
        closed_form_available=closed,
        closed_form_value=bstar_quadratic_closed_form(spec) if closed else None)


def bstar_quadratic_closed_form(spec: ProblemSpec) -> float:
    """For f(x) = x^2 the optimal barrier is
    1/Phi(q+r) - 1/Phi(q) - kappa'(0+)/(q+r) - q C / 2, exact arithmetic on
    the two Phi roots."""
    if spec.cost.kind != "quadratic":
        raise ValueError("closed form available for quadratic cost only")
    pair = kernel_pair(spec.model, spec.q, spec.r)
    kp0 = kappa_prime(spec.model, 0.0)
    return 1.0 / pair.phi_qr - 1.0 / pair.phi_q - kp0 / (spec.q + spec.r) - spec.q * spec.C / 2.0


def classical_m(spec: ProblemSpec, b: float) -> float:
    """Continuous-monitoring barrier selector
    Phi(q) * integral_b^inf f(y) e^{-Phi(q)(y-b)} dy + C q / Phi(q) - f(b);
    the exponential integral is exact for the piecewise polynomial costs."""
    spec.require_validated()
    pair = kernel_pair(spec.model, spec.q, spec.r)
    tail = _poly_exp_tail(spec.cost.pieces, b, pair.phi_q)
    return pair.phi_q * tail + spec.C * spec.q / pair.phi_q - spec.cost.f(b)


def classical_bstar(spec: ProblemSpec) -> float:
    """Barrier of the continuous-monitoring limit (observation rate -> inf)."""
    spec.require_validated()
    fn = lambda b: classical_m(spec, b)
    lo, hi, _ = _expand_bracket(fn)
    return float(brentq(fn, lo, hi, xtol=1e-13, rtol=8.9e-16, maxiter=200))


@dataclass(frozen=True)
class SweepRow:
    param_name: str
    param_value: float
    b_star: float | None
    residual: float | None
    values: tuple
    error: str | None = None

    def to_dict(self) -> dict:
        return {"param_name": self.param_name, "param_value": self.param_value,
                "b_star": self.b_star, "residual": self.residual,
                "values": list(self.values), "error": self.error}


def sweep(spec: ProblemSpec, parameter: str, values, x_grid,
          cfg: QuadratureConfig = DEFAULT_QUAD) -> list:
    """One solve + value-grid row per parameter value.

    ``parameter`` is "C" or "r" (each perturbed spec is re-validated), or "b"
    to sweep the barrier itself at a fixed spec (no solve; the residual column
    then reports |M(b)|).  Failures are recorded per row and the sweep
    continues.
    """
    spec.require_validated()
    if parameter not in ("C", "r", "b"):
        raise ValueError("parameter must be one of C, r, b")
    rows = []
    for v in values:
        try:
            if parameter == "b":
                b = float(v)
                vals = tuple(value(spec, b, x, cfg) for x in x_grid)
                rows.append(SweepRow(parameter, float(v), b, abs(m_func(spec, b, cfg)), vals))
                continue
            pspec = validate(replace(spec, **{parameter: float(v)}, validated=False))
            sol = solve_bstar(pspec, cfg)
            vals = tuple(value(pspec, sol.b_star, x, cfg) for x in x_grid)
            rows.append(SweepRow(parameter, float(v), sol.b_star, sol.residual, vals))
        except Exception as exc:  # noqa: BLE001 - per-row capture is the contract
            rows.append(SweepRow(parameter, float(v), None, None, (), error=str(exc)))
    return rows


def sweep_flags(rows) -> dict:
    """Qualitative observations over a sweep: barrier and value monotonicity."""
    ok = [r for r in rows if r.error is None]
    out = {"rows_failed": len(rows) - len(ok)}
    if len(ok) >= 2:
        bs = [r.b_star for r in ok]
        out["b_star_decreasing"] = all(b2 <= b1 + 1e-9 for b1, b2 in zip(bs, bs[1:]))
        out["b_star_increasing"] = all(b2 >= b1 - 1e-9 for b1, b2 in zip(bs, bs[1:]))
        if all(len(r.values) == len(ok[0].values) and len(r.values) > 0 for r in ok):
            inc = dec = True
            for j in range(len(ok[0].values)):
                col = [r.values[j] for r in ok]
                inc &= all(v2 >= v1 - 1e-9 for v1, v2 in zip(col, col[1:]))
                dec &= all(v2 <= v1 + 1e-9 for v1, v2 in zip(col, col[1:]))
            out["value_nondecreasing"] = inc
            out["value_nonincreasing"] = dec
    return out
