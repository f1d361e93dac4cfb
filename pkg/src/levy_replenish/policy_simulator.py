"""Exact-event Monte Carlo of the periodically replenished inventory.

Paths are event-driven: demand jumps (rate lam) and replenishment
opportunities (rate r) are superposed into one exponential clock, and between
events the inventory moves as mu * dt (+ Brownian noise when sigma > 0).  At
an opportunity with inventory below b the shortage is refilled instantly and
its discounted volume accrues; shortages persist untouched between
opportunities.

The running cost integral uses the left-endpoint rule on the grid refined by
events and by ticks at multiples of dt.  For sigma = 0 and polynomial cost of
degree <= 2 the tick sum inside a segment is a geometric-series closed form,
evaluated in O(1) per segment (bit-for-bit the same rule, without the
per-tick loop); higher degrees and sigma > 0 fall back to the explicit loop.

Randomness: per-path xoshiro256** states seeded by splitmix64 from
(base_seed, path_index).  Estimates are reproducible bit-exactly for a fixed
(seed, config) and independent of any execution-order concerns, since paths
never share state.  Antithetic pairs share a seed index and mirror every
uniform u -> 1 - u (normals are negated); uniforms are generated strictly
inside (0, 1) so the mirror is safe.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .levy_model import ProblemSpec, kappa_prime

__all__ = [
    "SimConfig",
    "SimEstimate",
    "ValueEstimate",
    "simulate_path",
    "simulate_path_events",
    "estimate_value",
    "estimate_killed_resolvent",
    "estimate_occupation_to_ruin",
    "suggested_horizon",
    "truncation_bound",
]

_U64 = np.uint64
_GOLD = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo controls.

    ``horizon`` truncates each path at time T; the reported truncation bound
    is exp(-q T) * (f_envelope(R_T) + |C| * demand volume rate) / q with
    R_T = |x0| + |b| + |mean drift| T + 4 sqrt((sigma^2 + lam E[J^2]) T),
    i.e. the polynomial cost envelope at the drifted mean plus a four-sigma
    spread.  ``dt`` is the cost-integration tick; the left-endpoint rule bias
    is O(dt) and is reported, not corrected.
    """

    paths: int
    horizon: float
    dt: float = 1e-3
    seed: int = 0
    antithetic: bool = False

    def check(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.horizon < 0 or self.dt <= 0:
            # horizon 0 is the degenerate empty integral (both costs zero)
            raise ValueError("horizon must be >= 0 and dt > 0")
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic pairing needs an even path count")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    std_error: float
    paths: int
    truncation_bound: float
    wall_clock: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "paths": self.paths,
                "truncation_bound": self.truncation_bound, "wall_clock": self.wall_clock}


@dataclass(frozen=True)
class ValueEstimate:
    """Discounted policy cost split into its two parts.

    ``replenishment`` is the raw discounted order volume (no C applied);
    ``total`` = inventory + C * replenishment, estimated path-wise.
    """

    total: SimEstimate
    inventory: SimEstimate
    replenishment: SimEstimate
    mean_replenishment_count: float

    def to_dict(self) -> dict:
        return {"total": self.total.to_dict(), "inventory": self.inventory.to_dict(),
                "replenishment": self.replenishment.to_dict(),
                "mean_replenishment_count": self.mean_replenishment_count}


# -- RNG kernels ---------------------------------------------------------------


@njit(cache=True, nogil=True)
def _seed_state(base_seed, idx, st):
    s = _U64(base_seed) + (_U64(idx) + _U64(1)) * _GOLD
    for k in range(4):
        s = s + _GOLD
        z = s
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        st[k] = z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def _rotl(x, k):
    return (x << _U64(k)) | (x >> (_U64(64) - _U64(k)))


@njit(cache=True, nogil=True)
def _next_u64(st):
    result = _rotl(st[1] * _U64(5), 7) * _U64(9)
    t = st[1] << _U64(17)
    st[2] ^= st[0]
    st[3] ^= st[1]
    st[1] ^= st[2]
    st[0] ^= st[3]
    st[2] ^= t
    st[3] = _rotl(st[3], 45)
    return result


@njit(cache=True, nogil=True)
def _unif(st, mirror):
    u = (float(_next_u64(st) >> _U64(11)) + 0.5) * _INV53
    if mirror:
        return 1.0 - u
    return u


@njit(cache=True, nogil=True)
def _normal(st, mirror):
    u1 = (float(_next_u64(st) >> _U64(11)) + 0.5) * _INV53
    u2 = (float(_next_u64(st) >> _U64(11)) + 0.5) * _INV53
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    if mirror:
        return -z
    return z


@njit(cache=True, nogil=True)
def _draw_jump(st, mirror, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP):
    if jkind == 0:
        u = _unif(st, mirror)
        i = 0
        while i < jcumw.size - 1 and u > jcumw[i]:
            i += 1
        return -math.log(_unif(st, mirror)) / jrates[i]
    u = _unif(st, mirror)
    state = 0
    while state < ph_cum.size - 1 and u > ph_cum[state]:
        state += 1
    acc = 0.0
    n = ph_g.size
    while True:
        acc += -math.log(_unif(st, mirror)) / ph_g[state]
        u = _unif(st, mirror)
        nxt = 0
        while nxt < n and u > ph_cumP[state, nxt]:
            nxt += 1
        if nxt >= n:
            return acc
        state = nxt


# -- cost accrual ----------------------------------------------------------------


@njit(cache=True, nogil=True)
def _f_eval(x, bp, cf):
    p = 0
    while p < bp.size and x >= bp[p]:
        p += 1
    acc = 0.0
    for k in range(cf.shape[1] - 1, -1, -1):
        acc = acc * x + cf[p, k]
    return acc


@njit(cache=True, nogil=True)
def _tick_run_sum(m, M, y, omy, qdt, c0, c1, c2, alpha, w):
    """sum_{i=m}^{M} e^{-qdt i} (c0 + c1 a_i + c2 a_i^2) with a_i = alpha + w i."""
    n = M - m + 1
    if n <= 0:
        return 0.0
    if n <= 8:
        acc = 0.0
        for i in range(m, M + 1):
            a = alpha + w * i
            acc += math.exp(-qdt * i) * (c0 + a * (c1 + c2 * a))
        return acc
    fn = float(n)
    ym = math.exp(-qdt * m)
    yn = math.exp(-qdt * fn)
    tt0 = (1.0 - yn) / omy
    tt1 = (1.0 - yn) * y / (omy * omy) - yn * fn / omy
    tt2 = (1.0 - yn) * y * (1.0 + y) / (omy * omy * omy) - \
        yn * (2.0 * fn * y / (omy * omy) + fn * fn / omy)
    fm = float(m)
    s0 = tt0
    s1 = fm * tt0 + tt1
    s2 = fm * fm * tt0 + 2.0 * fm * tt1 + tt2
    A = c0 + alpha * (c1 + c2 * alpha)
    B = (c1 + 2.0 * c2 * alpha) * w
    D = c2 * w * w
    return ym * (A * s0 + B * s1 + D * s2)


@njit(cache=True, nogil=True)
def _segment_cost(t0, t1, u0, mu, q, dt, bp, cf, closed_form):
    """Left-endpoint discounted cost of [t0, t1) with linear inventory
    u0 + mu (t - t0) and ticks at integer multiples of dt."""
    if t1 <= t0:
        return 0.0
    i0 = int(math.floor(t0 / dt)) + 1
    tick0 = i0 * dt
    if tick0 >= t1:
        return math.exp(-q * t0) * _f_eval(u0, bp, cf) * (t1 - t0)
    acc = math.exp(-q * t0) * _f_eval(u0, bp, cf) * (tick0 - t0)
    iN = int(math.floor(t1 / dt))
    if iN * dt >= t1:
        iN -= 1
    alpha = u0 - mu * t0
    w = mu * dt
    if closed_form:
        qdt = q * dt
        y = math.exp(-qdt)
        omy = -math.expm1(-qdt)
        i = i0
        while i <= iN - 1:
            a_i = alpha + w * i
            p = 0
            while p < bp.size and a_i >= bp[p]:
                p += 1
            j_end = iN - 1
            if w > 0.0 and p < bp.size:
                j_lim = int(math.floor((bp[p] - alpha) / w))
                if j_lim < j_end:
                    j_end = j_lim
            elif w < 0.0 and p > 0:
                j_lim = int(math.floor((bp[p - 1] - alpha) / w))
                if j_lim < j_end:
                    j_end = j_lim
            if j_end < i:
                j_end = i
            c1 = cf[p, 1] if cf.shape[1] > 1 else 0.0
            c2 = cf[p, 2] if cf.shape[1] > 2 else 0.0
            acc += dt * _tick_run_sum(i, j_end, y, omy, qdt, cf[p, 0], c1, c2, alpha, w)
            i = j_end + 1
    else:
        for i in range(i0, iN):
            acc += dt * math.exp(-q * dt * i) * _f_eval(alpha + w * i, bp, cf)
    aN = alpha + w * iN
    acc += math.exp(-q * dt * iN) * _f_eval(aN, bp, cf) * (t1 - iN * dt)
    return acc


# -- path kernels -----------------------------------------------------------------


@njit(cache=True, nogil=True)
def _policy_path(base_seed, idx, mirror, mu, sigma, lam, r_obs, q, b, x0, T, dt,
                 jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed_form,
                 tr_t, tr_u, tr_code, tr_cap):
    st = np.empty(4, dtype=np.uint64)
    _seed_state(base_seed, idx, st)
    t = 0.0
    u = x0
    inv = 0.0
    rep = 0.0
    cnt = 0
    n_tr = 0
    shortage_between = False
    if tr_cap > 0:
        tr_t[0] = 0.0
        tr_u[0] = u
        tr_code[0] = 3
        n_tr = 1
    tot = lam + r_obs
    while t < T:
        dt_ev = -math.log(_unif(st, mirror)) / tot
        t_next = t + dt_ev
        ev = -1
        if t_next >= T:
            t_next = T
        else:
            if lam > 0.0 and _unif(st, mirror) * tot < lam:
                ev = 0
            else:
                ev = 1
        if sigma == 0.0:
            inv += _segment_cost(t, t_next, u, mu, q, dt, bp, cf, closed_form)
            u += mu * (t_next - t)
        else:
            tt = t
            i = int(math.floor(t / dt)) + 1
            tick = i * dt
            while tick < t_next:
                d = tick - tt
                inv += math.exp(-q * tt) * _f_eval(u, bp, cf) * d
                u += mu * d + sigma * math.sqrt(d) * _normal(st, mirror)
                tt = tick
                i += 1
                tick = i * dt
            d = t_next - tt
            if d > 0.0:
                inv += math.exp(-q * tt) * _f_eval(u, bp, cf) * d
                u += mu * d + sigma * math.sqrt(d) * _normal(st, mirror)
        t = t_next
        if ev == 0:
            u -= _draw_jump(st, mirror, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP)
            if u < b:
                shortage_between = True
            if n_tr < tr_cap:
                tr_t[n_tr] = t
                tr_u[n_tr] = u
                tr_code[n_tr] = 0
                n_tr += 1
        elif ev == 1:
            if u < b:
                rep += math.exp(-q * t) * (b - u)
                cnt += 1
                u = b
                if n_tr < tr_cap:
                    tr_t[n_tr] = t
                    tr_u[n_tr] = u
                    tr_code[n_tr] = 2
                    n_tr += 1
            else:
                if n_tr < tr_cap:
                    tr_t[n_tr] = t
                    tr_u[n_tr] = u
                    tr_code[n_tr] = 1
                    n_tr += 1
    if n_tr < tr_cap:
        tr_t[n_tr] = T
        tr_u[n_tr] = u
        tr_code[n_tr] = 4
        n_tr += 1
    return inv, rep, cnt, shortage_between, n_tr


@njit(cache=True, nogil=True)
def _policy_many(n_paths, base_seed, antithetic, mu, sigma, lam, r_obs, q, b, x0, T, dt,
                 jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed_form,
                 out_inv, out_rep, out_cnt, out_flag):
    tr_t = np.empty(0, dtype=np.float64)
    tr_u = np.empty(0, dtype=np.float64)
    tr_code = np.empty(0, dtype=np.int64)
    for p in range(n_paths):
        if antithetic:
            idx = p // 2
            mirror = (p % 2) == 1
        else:
            idx = p
            mirror = False
        inv, rep, cnt, flag, _ = _policy_path(
            base_seed, idx, mirror, mu, sigma, lam, r_obs, q, b, x0, T, dt,
            jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed_form,
            tr_t, tr_u, tr_code, 0)
        out_inv[p] = inv
        out_rep[p] = rep
        out_cnt[p] = cnt
        out_flag[p] = 1 if flag else 0


@njit(cache=True, nogil=True)
def _linear_occupation(t_abs, seg, u0, mu, rho, a1, a2):
    """discounted time the line u0 + mu tau spends in [a1, a2] over tau in [0, seg]."""
    if seg <= 0.0:
        return 0.0
    if mu == 0.0:
        if a1 <= u0 <= a2:
            return math.exp(-rho * t_abs) * (-math.expm1(-rho * seg)) / rho
        return 0.0
    tlo = (a1 - u0) / mu
    thi = (a2 - u0) / mu
    if mu < 0.0:
        tlo, thi = thi, tlo
    if tlo < 0.0:
        tlo = 0.0
    if thi > seg:
        thi = seg
    if thi <= tlo:
        return 0.0
    return (math.exp(-rho * (t_abs + tlo)) - math.exp(-rho * (t_abs + thi))) / rho


@njit(cache=True, nogil=True)
def _killed_path(base_seed, idx, mirror, mu, sigma, lam, rho, x0, T, dt, a1, a2,
                 kill_dir, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP):
    """Occupation of [a1, a2] by the uncontrolled process, discounted at rho,
    killed at the first crossing of 0 (upward if kill_dir > 0, downward
    otherwise)."""
    st = np.empty(4, dtype=np.uint64)
    _seed_state(base_seed, idx, st)
    t = 0.0
    u = x0
    occ = 0.0
    while t < T:
        if lam > 0.0:
            dt_ev = -math.log(_unif(st, mirror)) / lam
        else:
            dt_ev = T - t
        t_next = t + dt_ev
        is_jump = True
        if t_next >= T:
            t_next = T
            is_jump = False
        if sigma == 0.0:
            seg = t_next - t
            killed = False
            if kill_dir > 0 and u < 0.0 and mu > 0.0:
                hit = -u / mu
                if hit < seg:
                    seg = hit
                    killed = True
            elif kill_dir < 0 and u > 0.0 and mu < 0.0:
                hit = -u / mu
                if hit < seg:
                    seg = hit
                    killed = True
            elif kill_dir > 0 and u >= 0.0:
                killed = True
                seg = 0.0
            elif kill_dir < 0 and u <= 0.0:
                killed = True
                seg = 0.0
            occ += _linear_occupation(t, seg, u, mu, rho, a1, a2)
            u += mu * seg
            t = t + seg
            if killed:
                return occ
        else:
            tt = t
            i = int(math.floor(t / dt)) + 1
            tick = i * dt
            while tt < t_next:
                nxt = tick if tick < t_next else t_next
                d = nxt - tt
                if a1 <= u <= a2:
                    occ += math.exp(-rho * tt) * (-math.expm1(-rho * d)) / rho
                u += mu * d + sigma * math.sqrt(d) * _normal(st, mirror)
                tt = nxt
                if nxt == tick:
                    i += 1
                    tick = i * dt
                if (kill_dir > 0 and u > 0.0) or (kill_dir < 0 and u < 0.0):
                    return occ
            t = t_next
        if is_jump:
            u -= _draw_jump(st, mirror, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP)
            if kill_dir < 0 and u < 0.0:
                return occ
    return occ


@njit(cache=True, nogil=True)
def _killed_many(n_paths, base_seed, antithetic, mu, sigma, lam, rho, x0, T, dt, a1, a2,
                 kill_dir, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, out):
    for p in range(n_paths):
        if antithetic:
            idx = p // 2
            mirror = (p % 2) == 1
        else:
            idx = p
            mirror = False
        out[p] = _killed_path(base_seed, idx, mirror, mu, sigma, lam, rho, x0, T, dt,
                              a1, a2, kill_dir, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP)


# -- python-side assembly -----------------------------------------------------------


def _jump_arrays(spec_model):
    law = spec_model.jump_law
    if spec_model.lam == 0.0 or law is None:
        return (0, np.array([1.0]), np.array([1.0]), np.array([1.0]),
                np.array([1.0]), np.zeros((1, 1)))
    if law.kind == "hyperexponential":
        cumw = np.cumsum(np.asarray(law.weights, dtype=float))
        rates = np.asarray(law.rates, dtype=float)
        return (0, cumw, rates, np.array([1.0]), np.array([1.0]), np.zeros((1, 1)))
    alpha = np.asarray(law.alpha, dtype=float)
    T = np.asarray(law.T, dtype=float)
    n = len(alpha)
    g = -np.diag(T)
    exit_rates = -T @ np.ones(n)
    cumP = np.zeros((n, n))
    for i in range(n):
        probs = np.array([T[i, j] / g[i] if j != i else 0.0 for j in range(n)])
        # cumulative over transitions; mass beyond the last entry is absorption
        cumP[i] = np.cumsum(probs)
        # exit_rates[i] / g[i] is the absorption probability, implicit remainder
        assert abs(cumP[i, -1] + exit_rates[i] / g[i] - 1.0) < 1e-9
    return (1, np.array([1.0]), np.array([1.0]), np.cumsum(alpha), g, cumP)


def _cost_arrays(cost):
    bp = np.asarray(cost.kinks, dtype=float)
    width = max(3, cost.degree + 1)
    cf = np.zeros((len(cost.pieces), width))
    for i, (_, _, c) in enumerate(cost.pieces):
        cf[i, :len(c)] = c
    closed_form = cost.degree <= 2
    return bp, cf, closed_form


def truncation_bound(spec: ProblemSpec, b: float, x0: float, T: float) -> float:
    """Documented horizon-truncation bound (see SimConfig)."""
    model = spec.model
    ej = model.jump_law.mean() if model.lam > 0 else 0.0
    ej2 = model.jump_law.moment(2) if model.lam > 0 else 0.0
    drift = kappa_prime(model, 0.0)
    R = abs(x0) + abs(b) + abs(drift) * T + 4.0 * math.sqrt((model.sigma ** 2 + model.lam * ej2) * T)
    vol_rate = model.lam * ej + abs(model.mu) + model.sigma
    return math.exp(-spec.q * T) * (spec.cost.envelope(R) + abs(spec.C) * vol_rate) / spec.q


def suggested_horizon(spec: ProblemSpec, b: float, x0: float, target: float) -> float:
    """Smallest horizon (searched by doubling + bisection) whose truncation
    bound is below ``target``."""
    lo, hi = 1.0 / spec.q, 1.0 / spec.q
    while truncation_bound(spec, b, x0, hi) > target:
        lo = hi
        hi *= 2.0
        if hi > 1e6 / spec.q:
            raise RuntimeError("horizon search failed; target too small")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if truncation_bound(spec, b, x0, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def simulate_path(spec: ProblemSpec, b: float, x0: float, config: SimConfig,
                  path_seed: int, path_index: int = 0, mirror: bool = False):
    """One policy path; returns (inventory_cost, replenishment_cost, count)."""
    spec.require_validated()
    config.check()
    jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP = _jump_arrays(spec.model)
    bp, cf, closed = _cost_arrays(spec.cost)
    e = np.empty(0, dtype=np.float64)
    ec = np.empty(0, dtype=np.int64)
    inv, rep, cnt, _, _ = _policy_path(
        path_seed, path_index, mirror, spec.model.mu, spec.model.sigma, spec.model.lam,
        spec.r, spec.q, b, x0, config.horizon, config.dt,
        jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed, e, e, ec, 0)
    return inv, rep, cnt


def simulate_path_events(spec: ProblemSpec, b: float, x0: float, config: SimConfig,
                         path_seed: int, path_index: int = 0, mirror: bool = False,
                         max_events: int = 100000):
    """One policy path with its event trace: arrays (t, inventory, code) where
    code is 0 jump, 1 observation without action, 2 replenishment, 3 start,
    4 horizon end."""
    spec.require_validated()
    config.check()
    jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP = _jump_arrays(spec.model)
    bp, cf, closed = _cost_arrays(spec.cost)
    tr_t = np.empty(max_events, dtype=np.float64)
    tr_u = np.empty(max_events, dtype=np.float64)
    tr_code = np.empty(max_events, dtype=np.int64)
    inv, rep, cnt, flag, n = _policy_path(
        path_seed, path_index, mirror, spec.model.mu, spec.model.sigma, spec.model.lam,
        spec.r, spec.q, b, x0, config.horizon, config.dt,
        jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed,
        tr_t, tr_u, tr_code, max_events)
    return (inv, rep, cnt, flag), tr_t[:n], tr_u[:n], tr_code[:n]


def _pack_estimate(samples, antithetic, bound, elapsed) -> SimEstimate:
    if antithetic:
        samples = samples.reshape(-1, 2).mean(axis=1)
    n = samples.size
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return SimEstimate(mean=float(samples.mean()), std_error=se, paths=int(n),
                       truncation_bound=bound, wall_clock=elapsed)


def estimate_value(spec: ProblemSpec, b: float, x0: float, config: SimConfig) -> ValueEstimate:
    """Monte Carlo estimate of the policy value, split into the inventory and
    replenishment parts.  Identical (seed, config) give bit-identical output."""
    spec.require_validated()
    config.check()
    t0 = time.perf_counter()
    jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP = _jump_arrays(spec.model)
    bp, cf, closed = _cost_arrays(spec.cost)
    n = config.paths
    inv = np.empty(n)
    rep = np.empty(n)
    cnt = np.empty(n)
    flag = np.empty(n, dtype=np.uint8)
    _policy_many(n, config.seed, config.antithetic, spec.model.mu, spec.model.sigma,
                 spec.model.lam, spec.r, spec.q, b, x0, config.horizon, config.dt,
                 jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, bp, cf, closed,
                 inv, rep, cnt, flag)
    elapsed = time.perf_counter() - t0
    bound = truncation_bound(spec, b, x0, config.horizon)
    total = inv + spec.C * rep
    return ValueEstimate(
        total=_pack_estimate(total, config.antithetic, bound, elapsed),
        inventory=_pack_estimate(inv, config.antithetic, bound, elapsed),
        replenishment=_pack_estimate(rep, config.antithetic,
                                     math.exp(-spec.q * config.horizon) / spec.q, elapsed),
        mean_replenishment_count=float(cnt.mean()),
    )


def _killed_estimate(spec, x0, interval, config, rho, kill_dir) -> SimEstimate:
    config.check()
    t0 = time.perf_counter()
    if interval is None:
        return SimEstimate(0.0, 0.0, config.paths, 0.0, 0.0)
    a1, a2 = float(interval[0]), float(interval[1])
    if a2 <= a1:
        return SimEstimate(0.0, 0.0, config.paths, 0.0, 0.0)
    jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP = _jump_arrays(spec.model)
    out = np.empty(config.paths)
    _killed_many(config.paths, config.seed, config.antithetic, spec.model.mu,
                 spec.model.sigma, spec.model.lam, rho, x0, config.horizon, config.dt,
                 a1, a2, kill_dir, jkind, jcumw, jrates, ph_cum, ph_g, ph_cumP, out)
    elapsed = time.perf_counter() - t0
    bound = math.exp(-rho * config.horizon) / rho
    return _pack_estimate(out, config.antithetic, bound, elapsed)


def estimate_killed_resolvent(spec: ProblemSpec, x0: float, interval, config: SimConfig) -> SimEstimate:
    """Discounted (at q + r) occupation of ``interval`` (a subset of the
    negative half-line) by the uncontrolled inventory, killed when it first
    climbs above 0; started from x0 <= 0."""
    spec.require_validated()
    if x0 > 0:
        raise ValueError("x0 must be <= 0 for the up-crossing killed resolvent")
    if interval is not None and interval[1] > 0:
        raise ValueError("interval must lie in (-inf, 0]")
    return _killed_estimate(spec, x0, interval, config, spec.q + spec.r, kill_dir=+1)


def estimate_occupation_to_ruin(spec: ProblemSpec, x0: float, interval, config: SimConfig) -> SimEstimate:
    """Discounted (at q) occupation of ``interval`` (subset of [0, inf)) by the
    uncontrolled inventory, killed at its first passage below 0; x0 >= 0.
    Companion estimator used by the verifier's resolvent checks."""
    spec.require_validated()
    if x0 < 0:
        raise ValueError("x0 must be >= 0 for the ruin-killed occupation")
    return _killed_estimate(spec, x0, interval, config, spec.q, kill_dir=-1)
