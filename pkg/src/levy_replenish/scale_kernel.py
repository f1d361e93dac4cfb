"""Closed-form scale functions and every kernel derived from them.

For rational Laplace exponents (finite-activity phase-type jumps, as enforced
by levy_model) the scale function of rate s is a finite exponential sum

    W(x) = sum_k c_k exp(zeta_k x),   x >= 0,

where zeta_k are the roots of kappa(theta) = s (one real positive root, the
rest with negative real part) and c_k = 1/kappa'(zeta_k).  All derived
kernels (the two-parameter Z, the first-passage kernel H, the killed
resolvent kernel Theta, the shifted W, and the policy kernels Upsilon and
Psi) are exponential sums as well, so every integral against them is done
term by term with no quadrature.

Numerical note: in H, Theta, Psi and the running-infimum density the
coefficient of the growing exp(Phi x) mode cancels exactly by partial
fraction algebra.  The cancellation is performed symbolically (the k = 1
term is dropped), never by subtracting two large floats; otherwise these
kernels overflow for arguments a few hundred units deep.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .levy_model import (
    LevyModel,
    ProblemSpec,
    _kappa_complex,
    _kappa_prime_complex,
    phi as phi_root,
)

__all__ = [
    "ScaleBasis",
    "KernelPair",
    "build_basis",
    "kernel_pair",
    "w",
    "w_prime",
    "z",
    "w_bar",
    "z_bar",
    "z_theta",
    "z_qr",
    "w_shift",
    "h_kernel",
    "theta_kernel",
    "upsilon",
    "psi",
]

_IMAG_TOL = 1e-9


def _real(v) -> float:
    """Materialize a conjugate-symmetric sum as a real number."""
    v = complex(v)
    if abs(v.imag) > _IMAG_TOL * (1.0 + abs(v.real)):
        raise ArithmeticError(f"imaginary residue {v.imag:g} too large for value {v.real:g}")
    return v.real


def _expm1_over(zv) -> complex:
    """(e^z - 1)/z, stable for small |z| (complex-safe)."""
    zv = complex(zv)
    if abs(zv) < 1e-6:
        return 1.0 + zv / 2.0 + zv * zv / 6.0 + zv ** 3 / 24.0
    return (np.exp(zv) - 1.0) / zv


def _eint(a, x) -> complex:
    """integral_0^x e^{a u} du = x * (e^{a x} - 1)/(a x)."""
    return x * _expm1_over(complex(a) * x)


@dataclass(frozen=True)
class ScaleBasis:
    """Roots and residues of 1/(kappa - s): everything needed to evaluate
    the rate-s scale function and its one-basis derivatives.

    ``roots[0]`` is the unique positive real root Phi(s); the remaining roots
    have negative real part and occur in conjugate pairs with conjugate
    coefficients, so all evaluations are real.
    """

    model: LevyModel
    rate: float
    roots: tuple          # complex, roots[0] = Phi(rate)
    coeffs: tuple         # c_k = 1/kappa'(roots[k])
    w0: float             # W(0): 0 unbounded variation, 1/mu bounded variation
    bounded_variation: bool

    # cached ndarray views (tuples keep the dataclass hashable)
    @property
    def zk(self) -> np.ndarray:
        return np.asarray(self.roots, dtype=complex)

    @property
    def ck(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=complex)

    @property
    def phi(self) -> float:
        return float(self.roots[0].real)

    @property
    def neg_decay(self) -> float:
        """Slowest decay rate among the negative-real-part roots."""
        if len(self.roots) == 1:
            return float("inf")
        return float(-max(r.real for r in self.roots[1:]))

    # -- scale function and antiderivatives ---------------------------------

    def w(self, x: float) -> float:
        """W(x); zero on (-inf, 0), strictly increasing on [0, inf)."""
        if x < 0:
            return 0.0
        return _real(np.sum(self.ck * np.exp(self.zk * x)))

    def w_prime(self, x: float, side: int = 1) -> float:
        """Derivative of W; ``side`` < 0 gives the left value at the kink x=0."""
        if x < 0 or (x == 0 and side < 0):
            return 0.0
        return _real(np.sum(self.ck * self.zk * np.exp(self.zk * x)))

    def w_bar(self, x: float) -> float:
        """integral_0^x W(y) dy (0 for x <= 0)."""
        if x <= 0:
            return 0.0
        return _real(np.sum(self.ck / self.zk * (np.exp(self.zk * x) - 1.0)))

    def z(self, x: float) -> float:
        """Z(x) = 1 + rate * w_bar(x); equals 1 on the negative half-line."""
        return 1.0 + self.rate * self.w_bar(x)

    def z_bar(self, x: float) -> float:
        """integral_0^x Z(u) du; equals x on the negative half-line."""
        if x <= 0:
            return float(x)
        s = np.sum(self.ck / self.zk * ((np.exp(self.zk * x) - 1.0) / self.zk - x))
        return float(x) + self.rate * _real(s)

    # -- two-parameter Z and first-passage kernel H --------------------------

    def z_theta(self, x: float, theta: float) -> float:
        """Z(x, theta) = e^{theta x} (1 + (rate - kappa(theta)) *
        integral_0^x e^{-theta u} W(u) du).

        For x >= 0 the integral collapses term-wise to the pure sum
        (kappa(theta) - rate) * sum_k c_k e^{zeta_k x}/(theta - zeta_k); the
        coefficient of e^{theta x} is identically zero.  At theta equal to a
        root the value is exactly e^{theta x} (the prefactor vanishes).
        """
        if x <= 0:
            return float(np.exp(theta * x))
        dif = theta - self.zk
        if np.min(np.abs(dif)) < 1e-12 * (1.0 + abs(theta)):
            return float(np.exp(theta * x))
        pref = _kappa_complex(self.model, theta) - self.rate
        return _real(pref * np.sum(self.ck * np.exp(self.zk * x) / dif))

    def h(self, x: float, theta: float) -> float:
        """Expected discount e^{-rate * tau} e^{theta X(tau)} at the first
        passage tau of X below 0, started from x.

        Equals e^{theta x} for x < 0 and, for x >= 0,
        Z(x, theta) - (kappa(theta) - rate)/(theta - Phi) * W(x), in which the
        Phi-mode cancels exactly, leaving a decaying exponential sum.
        theta = Phi(rate) is a pole of the representation and is rejected.
        """
        if abs(theta - self.phi) < 1e-10 * (1.0 + self.phi):
            raise ValueError("theta equals the basis root Phi(rate): kernel representation has a pole")
        if x < 0:
            return float(np.exp(theta * x))
        pref = _kappa_complex(self.model, theta) - self.rate
        zk, ck = self.zk[1:], self.ck[1:]
        terms = ck * np.exp(zk * x) * (1.0 / (theta - zk) - 1.0 / (theta - self.phi))
        return _real(pref * np.sum(terms))

    # -- killed resolvent kernel Theta ---------------------------------------

    def theta_fn(self, x: float, y: float) -> float:
        """Theta(x, y) = e^{Phi x} W(-y) - W(x - y).

        Nonnegative for x, y <= 0 (it is the killed-occupation density) and
        nonpositive for x > 0, y <= x.  For y <= 0 <= x - y the Phi-mode
        cancels exactly and the safe sum over the decaying roots is used.
        """
        if y > 0:
            return -self.w(x - y)
        if x < y:
            return float(np.exp(self.phi * x)) * self.w(-y)
        zk, ck = self.zk[1:], self.ck[1:]
        s = np.sum(ck * np.exp(-zk * y) * (np.exp(self.phi * x) - np.exp(zk * x)))
        return _real(s)

    # -- law of the running infimum at an exponential time --------------------

    def running_min_atom(self) -> float:
        """P(-inf_t X(t) = 0 at an independent Exp(rate) time): the atom
        (rate/Phi) W(0), nonzero only in the bounded-variation case."""
        return self.rate / self.phi * self.w0

    def running_min_density(self, y: float) -> float:
        """Density of -inf X at an Exp(rate) time on y > 0:
        (rate/Phi) (W'(y) - Phi W(y)), a decaying sum (Phi-mode cancels)."""
        if y <= 0:
            return 0.0
        zk, ck = self.zk[1:], self.ck[1:]
        s = np.sum(ck * (zk - self.phi) * np.exp(zk * y))
        return self.rate / self.phi * _real(s)

    def resolvent_density_free(self, d: float) -> float:
        """Density of the rate-discounted occupation of the free process at
        displacement d = x - y:  e^{Phi d}/kappa'(Phi) - W(d)."""
        if d < 0:
            return _real(self.ck[0]) * float(np.exp(self.phi * d))
        zk, ck = self.zk[1:], self.ck[1:]
        return -_real(np.sum(ck * np.exp(zk * d)))

    def laplace_value(self, theta: float) -> float:
        """1/(kappa(theta) - rate) for theta > Phi(rate): the transform that
        defines W."""
        return 1.0 / (float(_kappa_complex(self.model, theta).real) - self.rate)

    def debug_dump(self) -> dict:
        return {
            "rate": self.rate,
            "roots_re": [r.real for r in self.roots],
            "roots_im": [r.imag for r in self.roots],
            "coeffs_re": [c.real for c in self.coeffs],
            "coeffs_im": [c.imag for c in self.coeffs],
            "w0": self.w0,
            "bounded_variation": self.bounded_variation,
        }


def _char_poly(model: LevyModel, s: float) -> np.ndarray:
    """Numerator polynomial (highest first) of kappa(theta) - s after clearing
    the jump-transform denominator."""
    if model.sigma > 0:
        drift = np.array([0.5 * model.sigma ** 2, model.mu, -(s + model.lam)])
    else:
        drift = np.array([model.mu, -(s + model.lam)])
    if model.lam == 0:
        return drift
    num, den = model.jump_law.transform_num_den()
    return np.polyadd(np.polymul(drift, den), model.lam * np.asarray(num))


def _merged_hyperexp(law):
    """Merge duplicate rates in a hyperexponential mixture (duplicates make
    the cleared polynomial carry spurious pole/root pairs)."""
    rates = np.asarray(law.rates)
    weights = np.asarray(law.weights)
    out_r, out_w = [], []
    for rr, ww in zip(rates, weights):
        for i, prev in enumerate(out_r):
            if abs(rr - prev) <= 1e-12 * max(1.0, abs(prev)):
                out_w[i] += ww
                break
        else:
            out_r.append(float(rr))
            out_w.append(float(ww))
    if len(out_r) == len(rates):
        return law
    from .levy_model import JumpLaw

    return JumpLaw.hyperexponential(out_w, out_r)


@lru_cache(maxsize=128)
def build_basis(model: LevyModel, s: float) -> ScaleBasis:
    """Construct the rate-s scale basis: companion-matrix roots of the cleared
    polynomial of kappa(theta) - s, two Newton polish steps, residue
    coefficients 1/kappa'(zeta_k), and the structural sanity checks.

    Raises on repeated or nearly multiple roots (the residue formula
    degenerates); perturb the model parameters in that case.
    """
    if model.lam > 0 and model.jump_law is not None and model.jump_law.kind == "hyperexponential":
        merged = _merged_hyperexp(model.jump_law)
        if merged is not model.jump_law:
            from dataclasses import replace

            model = replace(model, jump_law=merged)
    poly = _char_poly(model, s)
    roots = np.roots(poly).astype(complex)
    for _ in range(2):
        roots = roots - (np.array([_kappa_complex(model, z) for z in roots]) - s) / \
            np.array([_kappa_prime_complex(model, z) for z in roots])

    resid = np.abs(np.array([_kappa_complex(model, z) for z in roots]) - s)
    if np.any(resid > 1e-8 * (1.0 + s)):
        raise ArithmeticError(
            "root cross-check failed (spurious or ill-conditioned roots); "
            "perturb the model parameters (e.g. merge duplicate phases)")

    scale = max(1.0, float(np.max(np.abs(roots))))
    if len(roots) > 1:
        dmin = min(abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:])
        if dmin < 1e-8 * scale:
            raise ArithmeticError(
                f"nearly multiple roots (min separation {dmin:.2e}); perturb the model parameters")

    pos = [i for i, rt in enumerate(roots) if rt.real > 0]
    if len(pos) != 1:
        raise ArithmeticError(f"expected exactly one positive root, found {len(pos)}")
    lead = phi_root(model, s)
    if abs(roots[pos[0]] - lead) > 1e-10 * (1.0 + lead):
        raise ArithmeticError("companion-matrix root disagrees with the bracketed Phi(rate)")
    order = [pos[0]] + sorted((i for i in range(len(roots)) if i != pos[0]),
                              key=lambda i: (-roots[i].real, roots[i].imag))
    roots = roots[order]
    roots[0] = complex(lead, 0.0)

    coeffs = 1.0 / np.array([_kappa_prime_complex(model, z) for z in roots])
    bv = model.bounded_variation
    w0 = 1.0 / model.mu if bv else 0.0
    tot = np.sum(coeffs)
    if abs(tot - w0) > 1e-10 * max(1.0, abs(w0)):
        raise ArithmeticError(f"sum of residues {tot} does not match W(0) = {w0}")

    expected_n = model.n_phases + 1 + (1 if model.sigma > 0 else 0)
    if len(roots) != expected_n:
        raise ArithmeticError(f"root count {len(roots)} != expected {expected_n}")

    return ScaleBasis(model=model, rate=float(s), roots=tuple(roots), coeffs=tuple(coeffs),
                      w0=w0, bounded_variation=bv)


@dataclass(frozen=True)
class KernelPair:
    """The (q, q+r) pair of scale bases plus every two-basis policy kernel."""

    base_q: ScaleBasis
    base_qr: ScaleBasis
    q: float
    r: float

    @classmethod
    def for_spec(cls, spec: ProblemSpec) -> "KernelPair":
        return kernel_pair(spec.model, spec.q, spec.r)

    @property
    def phi_q(self) -> float:
        return self.base_q.phi

    @property
    def phi_qr(self) -> float:
        return self.base_qr.phi

    def z_qr(self, x: float) -> float:
        """Z^{(q,r)}(x) = r/(q+r) Z^{(q)}(x) + q/(q+r) Z^{(q)}(x, Phi(q+r));
        equals (r + q e^{Phi(q+r) x})/(q+r) on the negative half-line and 1
        at the origin."""
        qr = self.q + self.r
        return (self.r * self.base_q.z(x) + self.q * self.base_q.z_theta(x, self.phi_qr)) / qr

    def z_qr_prime(self, x: float) -> float:
        """d/dx Z^{(q,r)}(x) = (q/(q+r)) Phi(q+r) Z^{(q)}(x, Phi(q+r))."""
        return self.q / (self.q + self.r) * self.phi_qr * self.base_q.z_theta(x, self.phi_qr)

    # -- shifted scale function ----------------------------------------------

    def w_shift(self, y: float, x: float, representation: int = 2) -> float:
        """W_y(x): W^{(q)}(x - y) for y >= 0; for y < 0 a convolution
        correction is added.  Two algebraically equal representations exist
        (a q+r-side and a q-side convolution); both are kept as independent
        code paths for cross-checks.
        """
        if y >= 0:
            return self.base_q.w(x - y)
        if representation == 2:
            m = min(-y, x - y)
            if m <= 0:
                return self.base_q.w(x - y)
            zq, cq = self.base_q.zk, self.base_q.ck
            zr, cr = self.base_qr.zk, self.base_qr.ck
            acc = 0.0 + 0.0j
            for zk, ck in zip(zq, cq):
                inner = np.sum(cr * np.array([_eint(zl - zk, m) for zl in zr]))
                acc += ck * np.exp(zk * (x - y)) * inner
            return self.base_q.w(x - y) + self.r * _real(acc)
        if representation == 1:
            if x <= 0:
                return self.base_qr.w(x - y)
            zq, cq = self.base_q.zk, self.base_q.ck
            zr, cr = self.base_qr.zk, self.base_qr.ck
            acc = 0.0 + 0.0j
            for zl, cl in zip(zr, cr):
                inner = np.sum(cq * np.exp(zq * x) * np.array([_eint(zl - zk, x) for zk in zq]))
                acc += cl * np.exp(-zl * y) * inner
            return self.base_qr.w(x - y) - self.r * _real(acc)
        raise ValueError("representation must be 1 or 2")

    # -- policy kernels --------------------------------------------------------

    def upsilon(self, x: float, y: float) -> float:
        """Resolvent correction kernel: W^{(q)}(x - y) for y > 0, -Theta(x, y)
        for x < 0, and for x >= 0 >= y the fully cancelled exponential sum

            sum_{l >= 2} c_l e^{-xi_l y} (Z^{(q)}(x, xi_l) - Z^{(q)}(x, Phi(q+r)))

        over the decaying roots xi_l of the q+r basis, where Z^{(q)}(x, xi_l)
        is the pure-sum form r sum_k c_k e^{zeta_k x}/(xi_l - zeta_k).  The
        growing e^{Phi(q+r) x} modes that appear in the defining convolution
        cancel exactly and are never formed, so the kernel stays at the
        e^{Phi(q) x} magnitude of its true value.  Vanishes at x = 0, y < 0.
        """
        if y > 0:
            return self.base_q.w(x - y)
        if x < 0:
            return -self.base_qr.theta_fn(x, y)
        zq, cq = self.base_q.zk, self.base_q.ck
        eq = cq * np.exp(zq * x)
        z_phi = self.r * np.sum(eq / (self.phi_qr - zq))
        acc = 0.0 + 0.0j
        for xl, cl in zip(self.base_qr.zk[1:], self.base_qr.ck[1:]):
            z_xl = self.r * np.sum(eq / (xl - zq))
            acc += cl * np.exp(-xl * y) * (z_xl - z_phi)
        return _real(acc)

    def upsilon_conv(self, x: float, y: float) -> float:
        """The defining assembly -Theta(x, y) + r * integral_0^x
        W^{(q)}(x - z) Theta(z, y) dz, z-integral term-wise.  Equal to
        ``upsilon`` but cancellation-prone when Phi(q+r) (x - b) is large;
        kept as an independent cross-check path."""
        if y > 0:
            return self.base_q.w(x - y)
        theta_term = -self.base_qr.theta_fn(x, y)
        if x <= 0:
            return theta_term
        zq, cq = self.base_q.zk, self.base_q.ck
        zr, cr = self.base_qr.zk[1:], self.base_qr.ck[1:]
        pq = self.phi_qr
        acc = 0.0 + 0.0j
        for zl, cl in zip(zq, cq):
            e_phi = _eint(pq - zl, x)
            for zk, ck in zip(zr, cr):
                acc += cl * ck * np.exp(-zk * y) * np.exp(zl * x) * (e_phi - _eint(zk - zl, x))
        return theta_term + self.r * _real(acc)

    def upsilon_direct(self, x: float, y: float) -> float:
        """The alternative assembly W_y(x) - Z^{(q)}(x, Phi(q+r)) W^{(q+r)}(-y)
        (cancellation-prone for very negative y; kept for cross-checks)."""
        return self.w_shift(y, x) - self.base_q.z_theta(x, self.phi_qr) * self.base_qr.w(-y)

    def psi(self, x: float, y: float) -> float:
        """Derivative-side kernel: upsilon minus
        (Phi(q+r)/(q+r)) Z^{(q)}(x, Phi(q+r)) H^{(q+r)}(-y)."""
        fac = self.phi_qr / (self.q + self.r)
        return self.upsilon(x, y) - fac * self.base_q.z_theta(x, self.phi_qr) * self.base_qr.h(-y, 0.0)

    def psi_direct(self, x: float, y: float) -> float:
        """Direct assembly W_y(x) - (Phi(q+r)/(q+r)) Z^{(q)}(x, Phi(q+r))
        Z^{(q+r)}(-y); cross-check path."""
        fac = self.phi_qr / (self.q + self.r)
        return self.w_shift(y, x) - fac * self.base_q.z_theta(x, self.phi_qr) * self.base_qr.z(-y)


@lru_cache(maxsize=64)
def kernel_pair(model: LevyModel, q: float, r: float) -> KernelPair:
    return KernelPair(base_q=build_basis(model, q), base_qr=build_basis(model, q + r), q=q, r=r)


# -- thin functional wrappers matching the operation names -------------------

def w(basis: ScaleBasis, x: float) -> float:
    return basis.w(x)


def w_prime(basis: ScaleBasis, x: float, side: int = 1) -> float:
    return basis.w_prime(x, side)


def z(basis: ScaleBasis, x: float) -> float:
    return basis.z(x)


def w_bar(basis: ScaleBasis, x: float) -> float:
    return basis.w_bar(x)


def z_bar(basis: ScaleBasis, x: float) -> float:
    return basis.z_bar(x)


def z_theta(basis: ScaleBasis, x: float, theta: float) -> float:
    return basis.z_theta(x, theta)


def z_qr(pair: KernelPair, x: float) -> float:
    return pair.z_qr(x)


def w_shift(pair: KernelPair, y: float, x: float, representation: int = 2) -> float:
    return pair.w_shift(y, x, representation)


def h_kernel(basis: ScaleBasis, x: float, theta: float) -> float:
    return basis.h(x, theta)


def theta_kernel(basis: ScaleBasis, x: float, y: float) -> float:
    return basis.theta_fn(x, y)


def upsilon(pair: KernelPair, x: float, y: float) -> float:
    return pair.upsilon(x, y)


def psi(pair: KernelPair, x: float, y: float) -> float:
    return pair.psi(x, y)
