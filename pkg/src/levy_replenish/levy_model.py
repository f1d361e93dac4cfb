"""Spectrally negative Levy inventory models and problem specifications.

The uncontrolled inventory is X(t) = x - D(t) for a demand process D with
nonnegative jumps, so X is spectrally negative.  Everything here uses the
natural parametrization

    X(t) = mu * t + sigma * B(t) - sum_{i <= N(t)} J_i,

with B standard Brownian motion, N a Poisson process of rate ``lam`` and
J_i i.i.d. nonnegative jumps with a rational (phase-type) Laplace
transform.  The Laplace exponent is

    kappa(theta) = sigma^2 theta^2 / 2 + mu * theta + lam * (E[e^{-theta J}] - 1),

which is finite for theta > -eta_min where eta_min is the decay rate of the
jump density, convex, and satisfies kappa(0) = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "JumpLaw",
    "CostModel",
    "LevyModel",
    "ProblemSpec",
    "ValidationError",
    "laplace_exponent",
    "kappa_prime",
    "phi",
    "validate",
    "spec_from_json",
    "spec_to_json",
]

_NEG_INF = float("-inf")
_POS_INF = float("inf")


class ValidationError(ValueError):
    """A model or problem specification violates a standing requirement.

    ``violations`` is a list of ``(identity, message)`` pairs; ``identity`` is a
    stable snake_case name for the violated requirement (e.g.
    ``cost_slope_bounds``) so callers can match on it without parsing text.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"[{k}] {m}" for k, m in self.violations))

    @property
    def identities(self):
        return [k for k, _ in self.violations]


@dataclass(frozen=True)
class JumpLaw:
    """Distribution of one demand jump.

    Two representations are supported:

    * hyperexponential: weights ``p_i`` (summing to 1) and rates ``eta_i``;
      density sum_i p_i eta_i e^{-eta_i u} on u > 0.
    * phase-type: initial row vector ``alpha`` and sub-generator ``T`` with
      exit vector t = -T 1; density alpha e^{Tu} t.

    Either way the Laplace transform E[e^{-theta J}] is a rational function
    of theta, finite for theta > -eta_min.
    """

    kind: str
    weights: tuple = ()
    rates: tuple = ()
    alpha: tuple = ()
    T: tuple = ()

    @classmethod
    def hyperexponential(cls, weights, rates) -> "JumpLaw":
        law = cls(kind="hyperexponential",
                  weights=tuple(float(w) for w in weights),
                  rates=tuple(float(r) for r in rates))
        law._check()
        return law

    @classmethod
    def exponential(cls, rate) -> "JumpLaw":
        return cls.hyperexponential([1.0], [rate])

    @classmethod
    def phase_type(cls, alpha, T) -> "JumpLaw":
        law = cls(kind="phase_type",
                  alpha=tuple(float(a) for a in alpha),
                  T=tuple(tuple(float(v) for v in row) for row in T))
        law._check()
        return law

    def _check(self):
        bad = []
        if self.kind == "hyperexponential":
            w = np.asarray(self.weights)
            e = np.asarray(self.rates)
            if len(w) != len(e) or len(w) == 0:
                bad.append(("jump_mixture_shape", "weights and rates must be equal-length and nonempty"))
            else:
                if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                    bad.append(("jump_weights", f"weights must be nonnegative and sum to 1 (sum={w.sum()!r})"))
                if np.any(e <= 0):
                    bad.append(("jump_rates_positive", "all jump rates must be strictly positive"))
        elif self.kind == "phase_type":
            a = np.asarray(self.alpha)
            T = np.asarray(self.T)
            n = len(a)
            if T.shape != (n, n) or n == 0:
                bad.append(("jump_phase_shape", "alpha and T have inconsistent shapes"))
            else:
                if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
                    bad.append(("jump_phase_alpha", "alpha must be a probability row vector summing to 1"))
                if np.any(np.diag(T) >= 0):
                    bad.append(("jump_phase_diagonal", "T must have strictly negative diagonal"))
                off = T - np.diag(np.diag(T))
                if np.any(off < 0):
                    bad.append(("jump_phase_offdiagonal", "off-diagonal entries of T must be nonnegative"))
                if np.any(T.sum(axis=1) > 1e-12):
                    bad.append(("jump_phase_rowsums", "row sums of T must be <= 0"))
                if not bad and abs(np.linalg.det(T)) < 1e-300:
                    bad.append(("jump_phase_absorbing", "T must be nonsingular (absorption must be certain)"))
            if not bad and self.eta_min <= 0:
                bad.append(("jump_transform_domain", "T must have eigenvalues with negative real part"))
        else:
            bad.append(("jump_kind", f"unknown jump law kind {self.kind!r}"))
        if bad:
            raise ValidationError(bad)

    @property
    def n_phases(self) -> int:
        if self.kind == "hyperexponential":
            return len(self.rates)
        return len(self.alpha)

    @property
    def eta_min(self) -> float:
        """Decay rate of the density tail; transform finite for theta > -eta_min."""
        if self.kind == "hyperexponential":
            return float(min(self.rates))
        eig = np.linalg.eigvals(np.asarray(self.T))
        return float(-np.max(eig.real))

    def mean(self) -> float:
        if self.kind == "hyperexponential":
            return float(np.sum(np.asarray(self.weights) / np.asarray(self.rates)))
        a = np.asarray(self.alpha)
        T = np.asarray(self.T)
        return float(a @ np.linalg.solve(-T, np.ones(len(a))))

    def moment(self, k: int) -> float:
        """E[J^k] = k! * alpha (-T)^{-k} 1 (matrix form also covers mixtures)."""
        a, T = self._as_matrix()
        v = np.ones(len(a))
        for _ in range(k):
            v = np.linalg.solve(-T, v)
        return float(math.factorial(k) * (a @ v))

    def _as_matrix(self):
        if self.kind == "phase_type":
            return np.asarray(self.alpha), np.asarray(self.T)
        # hyperexponential as a diagonal phase-type
        return np.asarray(self.weights), np.diag(-np.asarray(self.rates))

    def transform(self, theta) -> complex:
        """E[e^{-theta J}] as a rational function (analytic continuation off poles)."""
        if self.kind == "hyperexponential":
            w = np.asarray(self.weights)
            e = np.asarray(self.rates)
            return complex(np.sum(w * e / (e + theta)))
        a, T = np.asarray(self.alpha), np.asarray(self.T)
        n = len(a)
        t = -T @ np.ones(n)
        sol = np.linalg.solve(theta * np.eye(n) - T, t)
        return complex(a @ sol)

    def transform_deriv(self, theta) -> complex:
        """d/dtheta E[e^{-theta J}]."""
        if self.kind == "hyperexponential":
            w = np.asarray(self.weights)
            e = np.asarray(self.rates)
            return complex(-np.sum(w * e / (e + theta) ** 2))
        a, T = np.asarray(self.alpha), np.asarray(self.T)
        n = len(a)
        t = -T @ np.ones(n)
        M = theta * np.eye(n) - T
        return complex(-(a @ np.linalg.solve(M, np.linalg.solve(M, t))))

    def transform_num_den(self):
        """Polynomial pair (num, den), highest degree first, with
        E[e^{-theta J}] = num(theta)/den(theta).

        Hyperexponential laws give den = prod(theta + eta_i) directly; matrix
        phase-type laws use the Faddeev-LeVerrier recursion for
        det(theta I - T) and alpha adj(theta I - T) t.
        """
        if self.kind == "hyperexponential":
            e = np.asarray(self.rates, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            den = np.poly(-e)  # prod (theta + eta_i)
            num = np.zeros(len(e))
            for i in range(len(e)):
                others = np.delete(e, i)
                num = np.polyadd(num, w[i] * e[i] * np.poly(-others))
            return num, den
        a, T = np.asarray(self.alpha), np.asarray(self.T)
        n = len(a)
        t = -T @ np.ones(n)
        # Faddeev-LeVerrier: (theta I - T)^{-1} = sum_k B_k theta^{n-1-k} / p(theta)
        B = np.eye(n)
        den = np.zeros(n + 1)
        den[0] = 1.0
        num = np.zeros(n)
        num[0] = a @ B @ t
        for k in range(1, n + 1):
            c = -np.trace(T @ B) / k
            den[k] = c
            if k < n:
                B = T @ B + c * np.eye(n)
                num[k] = a @ B @ t
        return num, den

    def density(self, u):
        """Jump density at u >= 0 (scalar)."""
        if u < 0:
            return 0.0
        if self.kind == "hyperexponential":
            w = np.asarray(self.weights)
            e = np.asarray(self.rates)
            return float(np.sum(w * e * np.exp(-e * u)))
        from scipy.linalg import expm

        a, T = np.asarray(self.alpha), np.asarray(self.T)
        t = -T @ np.ones(len(a))
        return float(a @ expm(T * u) @ t)

    def to_dict(self):
        if self.kind == "hyperexponential":
            return {"weights": list(self.weights), "rates": list(self.rates)}
        return {"alpha": list(self.alpha), "T": [list(r) for r in self.T]}


@dataclass(frozen=True)
class CostModel:
    """Convex running inventory cost f, stored as polynomial pieces.

    ``pieces`` is a tuple of (lo, hi, coeffs) with coeffs in ascending powers;
    f(x) = sum_k coeffs[k] x^k on [lo, hi).  Supported kinds:

    * ``quadratic``: f(x) = x^2,
    * ``piecewise_linear``: f(x) = h x^+ + p x^- with h, p > 0,
    * ``polynomial``: user coefficients (must be convex).
    """

    kind: str
    pieces: tuple
    params: tuple = ()

    @classmethod
    def quadratic(cls) -> "CostModel":
        return cls(kind="quadratic", pieces=((_NEG_INF, _POS_INF, (0.0, 0.0, 1.0)),))

    @classmethod
    def piecewise_linear(cls, h: float, p: float) -> "CostModel":
        if h <= 0 or p <= 0:
            raise ValidationError([("cost_linear_slopes", "holding and shortage slopes must be positive")])
        return cls(kind="piecewise_linear",
                   pieces=((_NEG_INF, 0.0, (0.0, -float(p))), (0.0, _POS_INF, (0.0, float(h)))),
                   params=(float(h), float(p)))

    @classmethod
    def polynomial(cls, coeffs) -> "CostModel":
        c = tuple(float(v) for v in coeffs)
        return cls(kind="polynomial", pieces=((_NEG_INF, _POS_INF, c),), params=c)

    @property
    def kinks(self) -> tuple:
        return tuple(p[0] for p in self.pieces[1:])

    @property
    def degree(self) -> int:
        return max(len(p[2]) for p in self.pieces) - 1

    def _piece(self, x: float, side: int = 1):
        for lo, hi, c in self.pieces:
            if (lo < x < hi) or (x == lo and side >= 0) or (x == hi and side < 0):
                return c
        return self.pieces[-1][2] if x >= self.pieces[-1][0] else self.pieces[0][2]

    def f(self, x: float) -> float:
        c = self._piece(x)
        return float(np.polynomial.polynomial.polyval(x, c))

    def fprime(self, x: float, side: int = 1) -> float:
        """One-sided derivative; ``side`` picks the branch at a kink (+1 right)."""
        c = self._piece(x, side)
        d = np.polynomial.polynomial.polyder(np.asarray(c))
        if len(d) == 0:
            return 0.0
        return float(np.polynomial.polynomial.polyval(x, d))

    def fprime_limits(self):
        """(limit of f' at -inf, limit of f' at +inf)."""

        def lim(c, sign):
            d = np.polynomial.polynomial.polyder(np.asarray(c))
            if len(d) == 0:
                return 0.0
            if len(d) == 1:
                return float(d[0])
            lead = d[-1]
            return math.copysign(_POS_INF, lead * sign ** (len(d) - 1))

        return lim(self.pieces[0][2], -1.0), lim(self.pieces[-1][2], 1.0)

    def envelope(self, R: float) -> float:
        """Upper bound for |f(x)| over |x| <= R."""
        R = abs(R)
        return max(float(np.sum(np.abs(c) * R ** np.arange(len(c)))) for _, _, c in self.pieces)

    def fprime_envelope(self, R: float) -> float:
        R = abs(R)
        out = 0.0
        for _, _, c in self.pieces:
            d = np.polynomial.polynomial.polyder(np.asarray(c))
            if len(d):
                out = max(out, float(np.sum(np.abs(d) * R ** np.arange(len(d)))))
        return out

    def validate_against(self, q: float, C: float):
        bad = []
        lo, hi = self.fprime_limits()
        if not (lo < -C * q < hi):
            bad.append(("cost_slope_bounds",
                        f"cost slope bounds violated: need f'(-inf)={lo} < -C*q={-C * q} < f'(+inf)={hi}"))
        # convexity: f' nondecreasing across a grid spanning the pieces
        grid = np.unique(np.concatenate([np.linspace(-50.0, 50.0, 201), np.asarray(self.kinks)]))
        slopes = [self.fprime(x, side=-1) for x in grid] + [self.fprime(x, side=1) for x in grid]
        pairs = sorted(zip(list(grid) + list(grid), slopes))
        vals = [s for _, s in pairs]
        if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
            bad.append(("cost_convexity", "cost derivative must be nondecreasing"))
        return bad

    def to_dict(self):
        if self.kind == "quadratic":
            return {"kind": "quadratic"}
        if self.kind == "piecewise_linear":
            return {"kind": "piecewise_linear", "h": self.params[0], "p": self.params[1]}
        return {"kind": "polynomial", "coeffs": list(self.params)}


@dataclass(frozen=True)
class LevyModel:
    """Spectrally negative Levy process in natural parametrization.

    ``allow_degenerate`` is a test-only override admitting monotone paths
    (pure drift); production validation rejects them.
    """

    mu: float
    sigma: float = 0.0
    lam: float = 0.0
    jump_law: JumpLaw | None = None
    allow_degenerate: bool = False

    @property
    def bounded_variation(self) -> bool:
        return self.sigma == 0.0

    @property
    def eta_min(self) -> float:
        if self.lam == 0.0 or self.jump_law is None:
            return _POS_INF
        return self.jump_law.eta_min

    @property
    def n_phases(self) -> int:
        if self.lam == 0.0 or self.jump_law is None:
            return 0
        return self.jump_law.n_phases

    def check(self):
        bad = []
        if self.sigma < 0:
            bad.append(("gaussian_coefficient", "sigma must be >= 0"))
        if self.lam < 0:
            bad.append(("jump_rate", "lam must be >= 0"))
        if self.lam > 0 and self.jump_law is None:
            bad.append(("jump_law_missing", "lam > 0 requires a jump law"))
        if not self.allow_degenerate:
            if self.sigma == 0.0 and self.lam == 0.0:
                bad.append(("monotone_paths", "pure drift has monotone paths; pass allow_degenerate for tests"))
            if self.sigma == 0.0 and self.lam > 0 and self.mu <= 0:
                bad.append(("monotone_paths",
                            "sigma=0 with mu<=0 and downward jumps is the negative of a subordinator"))
        if self.sigma == 0.0 and self.lam > 0 and self.mu <= 0 and self.allow_degenerate:
            # even tests cannot use a driftless pure-jump model: W explodes
            bad.append(("bounded_variation_drift", "bounded variation requires drift c = mu > 0"))
        return bad

    def to_dict(self):
        d = {"mu": self.mu, "sigma": self.sigma, "lambda": self.lam}
        if self.jump_law is not None:
            d["jumps"] = self.jump_law.to_dict()
        return d


@dataclass(frozen=True)
class ProblemSpec:
    """One validated instance of the replenishment control problem."""

    model: LevyModel
    q: float
    r: float
    C: float
    cost: CostModel
    validated: bool = False

    def require_validated(self):
        if not self.validated:
            raise ValidationError([("not_validated", "spec must pass validate() before use")])

    def to_dict(self):
        return {"model": self.model.to_dict(), "q": self.q, "r": self.r,
                "C": self.C, "cost": self.cost.to_dict()}


def laplace_exponent(model: LevyModel, theta: float) -> float:
    """kappa(theta) = sigma^2 theta^2 / 2 + mu theta + lam (E[e^{-theta J}] - 1).

    Defined for theta >= 0; extension to theta > -eta_min is permitted for
    internal root finding.  kappa(0) = 0 exactly and kappa is convex.
    """
    if theta <= -model.eta_min:
        raise ValueError(f"jump transform diverges at theta={theta} <= -eta_min={-model.eta_min}")
    return float(_kappa_complex(model, theta).real)


def _kappa_complex(model: LevyModel, theta) -> complex:
    """Rational continuation of kappa to complex theta (no domain checks)."""
    val = 0.5 * model.sigma ** 2 * theta * theta + model.mu * theta
    if model.lam > 0:
        val = val + model.lam * (model.jump_law.transform(theta) - 1.0)
    return complex(val)


def kappa_prime(model: LevyModel, theta: float) -> float:
    """Analytic derivative of the Laplace exponent; kappa'(0+) = mu - lam E[J]."""
    return float(_kappa_prime_complex(model, theta).real)


def _kappa_prime_complex(model: LevyModel, theta) -> complex:
    val = model.sigma ** 2 * theta + model.mu
    if model.lam > 0:
        val = val + model.lam * model.jump_law.transform_deriv(theta)
    return complex(val)


def phi(model: LevyModel, rate: float) -> float:
    """Largest root of kappa(theta) = rate for rate > 0.

    Bracketed bisection refined by safeguarded Newton: kappa is convex with
    kappa(0) = 0 and kappa(theta) -> infinity, so the root beyond the convex
    minimum is unique and bracketing by doubling always terminates.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    hi = 1.0
    while laplace_exponent(model, hi) <= rate:
        hi *= 2.0
        if hi > 1e300:  # pragma: no cover - kappa -> inf rules this out
            raise RuntimeError("failed to bracket phi")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if laplace_exponent(model, mid) < rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6 * (1.0 + hi):
            break
    # Newton from the upper end: kappa is convex and increasing on the
    # bracket, so the iterates descend monotonically onto the root.
    x = hi
    for _ in range(100):
        fx = laplace_exponent(model, x) - rate
        dfx = kappa_prime(model, x)
        if dfx <= 0.0:  # pragma: no cover - impossible right of the minimum
            break
        x_new = x - fx / dfx
        if not (lo <= x_new <= hi):  # safeguard: fall back into the bracket
            x_new = 0.5 * (lo + hi)
        if laplace_exponent(model, x_new) < rate:
            lo = x_new
        else:
            hi = x_new
        if abs(x_new - x) <= 4e-16 * (1.0 + abs(x)):
            return float(x_new)
        x = x_new
    return float(0.5 * (lo + hi))


def validate(spec: ProblemSpec) -> ProblemSpec:
    """Check every standing requirement; return a sealed spec or raise.

    All violations are collected (not just the first) and reported with their
    identities in a single ValidationError.
    """
    bad = []
    bad.extend(spec.model.check())
    if spec.q <= 0:
        bad.append(("discount_rate", "q must be > 0"))
    if spec.r <= 0:
        bad.append(("observation_rate", "r must be > 0"))
    if spec.q > 0:
        bad.extend(spec.cost.validate_against(spec.q, spec.C))
    if bad:
        raise ValidationError(bad)
    return replace(spec, validated=True)


def _cost_from_dict(d) -> CostModel:
    kind = d.get("kind", "quadratic")
    if kind == "quadratic":
        return CostModel.quadratic()
    if kind == "piecewise_linear":
        return CostModel.piecewise_linear(d["h"], d["p"])
    if kind == "polynomial":
        return CostModel.polynomial(d["coeffs"])
    raise ValidationError([("cost_kind", f"unknown cost kind {kind!r}")])


def _jumps_from_dict(d) -> JumpLaw:
    if "alpha" in d:
        return JumpLaw.phase_type(d["alpha"], d["T"])
    return JumpLaw.hyperexponential(d["weights"], d["rates"])


def spec_from_json(text_or_dict) -> ProblemSpec:
    """Parse and validate a ProblemSpec from its JSON document form."""
    d = json.loads(text_or_dict) if isinstance(text_or_dict, (str, bytes)) else text_or_dict
    m = d["model"]
    law = _jumps_from_dict(m["jumps"]) if m.get("jumps") else None
    model = LevyModel(mu=float(m["mu"]), sigma=float(m.get("sigma", 0.0)),
                      lam=float(m.get("lambda", 0.0)), jump_law=law)
    spec = ProblemSpec(model=model, q=float(d["q"]), r=float(d["r"]),
                       C=float(d["C"]), cost=_cost_from_dict(d.get("cost", {})))
    return validate(spec)


def spec_to_json(spec: ProblemSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2)
