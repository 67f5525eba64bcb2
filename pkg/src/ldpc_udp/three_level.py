"""Density evolution for the 3-level (error-and-erasure) decoder on the BSC.

Messages live in {-1, 0, +1}. A variable node sends the sign of
w * channel + sum(incoming); zero sums become erasures. Check nodes send the
product of incoming signs (zero if any input is an erasure).

The per-iteration weight w is not fixed: the decoder may pick any integer
weight in [1, dv-1] each round, or hold its channel value (an effectively
infinite weight). Thresholds here are computed for the best such schedule,
approximated by a greedy pass plus a Pareto-front search over schedules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .ensemble import EnsembleSpec, ProtectionMode

DE_EPS = 1e-9
DE_CAP = 150
PARETO_FRONT_CAP = 256


class UnsupportedDegree(Exception):
    """Raised where a formula is derived only for specific degrees."""


@dataclass(frozen=True)
class ProbTriple:
    """Distribution of a 3-level message: P(-1), P(0), P(+1)."""

    p_m1: float
    p_0: float
    p_p1: float

    def validate(self, tol: float = 1e-12) -> "ProbTriple":
        s = self.p_m1 + self.p_0 + self.p_p1
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"triple mass {s} != 1")
        for v in (self.p_m1, self.p_0, self.p_p1):
            if v < -tol or v > 1.0 + tol:
                raise ValueError(f"component {v} outside [0,1]")
        return self

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_m1, self.p_0, self.p_p1)


@dataclass
class ThreeLevelState:
    regular: ProbTriple
    reliable: ProbTriple
    iter: int = 0
    weight_schedule: list[int] = field(default_factory=list)


# Weight encoding: integer w in [1, dv-1]; FREEZE re-sends the channel value
# (any weight > dv-1 acts this way, so one symbol suffices).
FREEZE = 0


def weight_options(dv: int) -> tuple[int, ...]:
    return tuple(range(1, dv)) + (FREEZE,)


@lru_cache(maxsize=None)
def _vn_terms(dv: int, w: int):
    """Multinomial terms (coeff, i, j, zeros) keyed by channel symbol, split
    into strictly-positive and exactly-zero weighted sums."""
    table = {}
    for c in (0, 1, -1):
        pos, zero = [], []
        for i in range(dv):
            for j in range(dv - i):
                z = dv - 1 - i - j
                coeff = math.factorial(dv - 1) // (
                    math.factorial(i) * math.factorial(j) * math.factorial(z))
                s = (i - j) + w * c
                if s > 0:
                    pos.append((coeff, i, j, z))
                elif s == 0:
                    zero.append((coeff, i, j, z))
        table[c] = (pos, zero)
    return table


def cn_update(reliable: ProbTriple, regular: ProbTriple, alpha: int, beta: int) -> ProbTriple:
    """Distribution of a product of alpha reliable and beta regular sign messages."""
    rm1, r0, rp1 = reliable.as_tuple()
    m1, z0, p1 = regular.as_tuple()
    q0 = 1.0 - (1.0 - r0) ** alpha * (1.0 - z0) ** beta
    splus = (rp1 + rm1) ** alpha * (p1 + m1) ** beta
    sminus = (rp1 - rm1) ** alpha * (p1 - m1) ** beta
    return ProbTriple(0.5 * (splus - sminus), q0, 0.5 * (splus + sminus))


def vn_update(q: ProbTriple, channel: ProbTriple, dv: int, w: int) -> ProbTriple:
    """Distribution of sign(w*channel + sum of dv-1 incoming CN messages)."""
    if w == FREEZE:
        return channel
    qm1, q0, q1 = q.as_tuple()
    cm1, c0, cp1 = channel.as_tuple()
    terms = _vn_terms(dv, w)
    p1 = p0 = 0.0
    for c, prob in ((0, c0), (1, cp1), (-1, cm1)):
        if prob == 0.0:
            continue
        pos, zero = terms[c]
        p1 += prob * sum(co * q1**i * qm1**j * q0**z for co, i, j, z in pos)
        p0 += prob * sum(co * q1**i * qm1**j * q0**z for co, i, j, z in zero)
    return ProbTriple(1.0 - p0 - p1, p0, p1)


def channel_triple(p: float) -> ProbTriple:
    """BSC prior: no erasure mass at the channel."""
    return ProbTriple(p, 0.0, 1.0 - p)


_PINNED = ProbTriple(0.0, 0.0, 1.0)


def _bad(t: ProbTriple) -> float:
    return t.p_m1 + t.p_0


def _cn_pair(rel: ProbTriple, reg: ProbTriple, spec: EnsembleSpec,
             doping: bool) -> tuple[ProbTriple, ProbTriple | None]:
    q_reg = cn_update(rel, reg, spec.x, spec.dc - 1 - spec.x)
    q_rel = None if doping else cn_update(rel, reg, spec.x - 1, spec.dc - spec.x)
    return q_reg, q_rel


def _greedy_run(spec: EnsembleSpec, ch_reg: ProbTriple, ch_rel: ProbTriple,
                doping: bool, eps: float, cap: int,
                record: list[int] | None = None) -> tuple[bool, list, list]:
    """Each population independently picks the integer weight minimizing its
    next error probability. Returns (converged, reg trajectory, rel trajectory)."""
    dv = spec.dv
    ws = tuple(range(1, dv))
    reg = ch_reg
    rel = _PINNED if doping else ch_rel
    traj_reg, traj_rel = [reg], [rel]
    for _ in range(cap):
        q_reg, q_rel = _cn_pair(rel, reg, spec, doping)
        best_w, best = None, None
        for w in ws:
            cand = vn_update(q_reg, ch_reg, dv, w)
            if best is None or cand.p_m1 < best.p_m1:
                best, best_w = cand, w
        reg = best
        rel = _PINNED if doping else min(
            (vn_update(q_rel, ch_rel, dv, w) for w in ws), key=lambda t: t.p_m1)
        traj_reg.append(reg)
        traj_rel.append(rel)
        if record is not None:
            record.append(best_w)
        if max(_bad(reg), _bad(rel)) < eps:
            return True, traj_reg, traj_rel
    return False, traj_reg, traj_rel


def _pareto2(items):
    """items: (err, era, payload); keep the nondominated, sorted by err."""
    items.sort(key=lambda t: (t[0], t[1]))
    out, best_era = [], float("inf")
    for it in items:
        if it[1] < best_era - 1e-18:
            out.append(it)
            best_era = it[1]
    return out


def _thin(front, cap):
    if len(front) <= cap:
        return front
    step = len(front) / cap
    return [front[int(i * step)] for i in range(cap)]


def _single_pop_schedule_search(spec: EnsembleSpec, ch: ProbTriple, alpha: int,
                                beta: int, eps: float, cap: int) -> bool:
    """Best-schedule convergence for one population (uniform or doping):
    dynamic program over the Pareto front of reachable (error, erasure) states."""
    dv = spec.dv
    ws = weight_options(dv)
    front = [(ch.p_m1, ch.p_0, ch)]
    for _ in range(cap):
        cands = []
        for _, _, reg in front:
            rel = _PINNED if alpha else reg
            q = cn_update(rel, reg, alpha, beta)
            for w in ws:
                c = vn_update(q, ch, dv, w)
                if _bad(c) < eps:
                    return True
                cands.append((c.p_m1, c.p_0, c))
        front = _thin(_pareto2(cands), PARETO_FRONT_CAP)
    return False


def _udp_schedule_search(spec: EnsembleSpec, ch_reg: ProbTriple, ch_rel: ProbTriple,
                         eps: float, cap: int) -> bool:
    """Best-schedule convergence for the coupled populations. The regular
    population branches over all weights; the reliable one over its greedy
    pick and a channel hold (freeze), which keeps the front tractable."""
    dv = spec.dv
    ws = weight_options(dv)
    gws = tuple(range(1, dv))
    front = [(ch_reg, ch_rel)]
    for _ in range(cap):
        cands = []
        for reg, rel in front:
            q_reg, q_rel = _cn_pair(rel, reg, spec, doping=False)
            rel_greedy = min((vn_update(q_rel, ch_rel, dv, w) for w in gws),
                             key=lambda t: t.p_m1)
            for w in ws:
                r2 = vn_update(q_reg, ch_reg, dv, w)
                for l2 in (rel_greedy, ch_rel):
                    if max(_bad(r2), _bad(l2)) < eps:
                        return True
                    cands.append((r2, l2))
        front = _thin(_pareto4(cands), PARETO_FRONT_CAP)
    return False


def _pareto4(cands):
    keyed = [((r.p_m1, r.p_0, l.p_m1, l.p_0), (r, l)) for r, l in cands]
    keyed.sort(key=lambda t: sum(t[0]))
    kept_keys: list[tuple] = []
    out = []
    for key, payload in keyed:
        dominated = False
        for k2 in kept_keys:
            if (k2[0] <= key[0] + 1e-18 and k2[1] <= key[1] + 1e-18
                    and k2[2] <= key[2] + 1e-18 and k2[3] <= key[3] + 1e-18):
                dominated = True
                break
        if not dominated:
            kept_keys.append(key)
            out.append(payload)
    return out


def tl_converges(spec: EnsembleSpec, mode: ProtectionMode, p: float, pbar: float,
                 eps: float = DE_EPS, cap: int = DE_CAP) -> bool:
    """True iff error and erasure probabilities of both populations reach eps
    within the iteration budget under the best available weight schedule."""
    if p <= 0.0 and (pbar <= 0.0 or mode is not ProtectionMode.UDP):
        return True
    ch_reg = channel_triple(p)
    if mode is ProtectionMode.UNIFORM or (mode is ProtectionMode.UDP and pbar == p):
        ok, _, _ = _greedy_run(spec, ch_reg, ch_reg, False, eps, cap)
        return ok or _single_pop_schedule_search(spec, ch_reg, 0, spec.dc - 1, eps, cap)
    if mode is ProtectionMode.DOPING:
        ok, _, _ = _greedy_run(spec, ch_reg, _PINNED, True, eps, cap)
        return ok or _single_pop_schedule_search(
            spec, ch_reg, spec.x, spec.dc - 1 - spec.x, eps, cap)
    ch_rel = channel_triple(pbar)
    ok, _, _ = _greedy_run(spec, ch_reg, ch_rel, False, eps, cap)
    return ok or _udp_schedule_search(spec, ch_reg, ch_rel, eps, cap)


def tl_de_run(spec: EnsembleSpec, mode: ProtectionMode, p: float, pbar: float,
              eps: float = DE_EPS, cap: int = DE_CAP) -> tuple[ThreeLevelState, bool]:
    """Run the greedy-schedule DE and report the final state plus a converged
    flag that also consults the schedule search (a greedy miss does not prove
    divergence)."""
    ch_reg = channel_triple(p)
    doping = mode is ProtectionMode.DOPING
    ch_rel = _PINNED if doping else channel_triple(p if mode is ProtectionMode.UNIFORM else pbar)
    sched: list[int] = []
    ok, traj_reg, traj_rel = _greedy_run(spec, ch_reg, ch_rel, doping, eps, cap, record=sched)
    state = ThreeLevelState(traj_reg[-1], traj_rel[-1], len(traj_reg) - 1, sched)
    if ok:
        return state, True
    return state, tl_converges(spec, mode, p, pbar, eps, cap)


def tl_approx_step(state: ThreeLevelState, spec: EnsembleSpec,
                   ch_err_reg: float, ch_err_rel: float) -> ThreeLevelState:
    """One step of the 2-term binomial approximation of the UDP recursion
    (derived for dv = 3, unit weight). Tracks (error, correct) per population;
    erasure mass is the complement."""
    if spec.dv != 3:
        raise UnsupportedDegree("approximate recursion is derived for dv = 3")

    def step(pop_err_ch: float, alpha: int, beta: int) -> ProbTriple:
        rm1, r1 = state.reliable.p_m1, state.reliable.p_p1
        pm1, p1 = state.regular.p_m1, state.regular.p_p1
        a = (1.0 + 2.0 * r1 ** (2 * alpha) * beta * p1 ** (2 * beta - 1) * pm1
             + 2.0 * alpha * r1 ** (2 * alpha - 1) * rm1 * p1 ** (2 * beta))
        b = ((r1 ** (2 * alpha) - alpha * r1 ** (2 * (alpha - 1)) * rm1 * rm1)
             * (p1 ** (2 * beta) - beta * p1 ** (2 * (beta - 1)) * pm1 * pm1))
        c = 2.0 * alpha * beta * r1 ** (2 * alpha - 1) * p1 ** (2 * beta - 1) * rm1 * pm1
        d = 0.5 * r1 ** (2 * alpha) * p1 ** (2 * beta) - 0.5 * b
        new_m1 = pop_err_ch * (
            a - 2.0 * r1**alpha * p1**beta
            - 2.0 * alpha * beta * r1 ** (alpha - 1) * p1 ** (beta - 1) * rm1 * pm1 + b
        ) + c + d
        new_p1 = (1.0 - pop_err_ch) * (
            a - 2.0 * r1**alpha * beta * p1 ** (beta - 1) * pm1
            - 2.0 * alpha * r1 ** (alpha - 1) * rm1 * p1**beta - b
        ) + r1 ** (2 * alpha) * p1 ** (2 * beta) + c - d
        return ProbTriple(new_m1, 1.0 - new_m1 - new_p1, new_p1)

    reg = step(ch_err_reg, spec.x, spec.dc - 1 - spec.x)
    rel = step(ch_err_rel, spec.x - 1, spec.dc - spec.x)
    return ThreeLevelState(reg, rel, state.iter + 1, state.weight_schedule)


def tl_approx_converges(spec: EnsembleSpec, p: float, pbar: float,
                        eps: float = DE_EPS, cap: int = DE_CAP) -> bool:
    """Convergence of the approximate recursion (both populations' error and
    erasure mass below eps)."""
    if p <= 0.0 and pbar <= 0.0:
        return True
    state = ThreeLevelState(channel_triple(p), channel_triple(pbar))
    prev = None
    for _ in range(cap):
        state = tl_approx_step(state, spec, p, pbar)
        reg, rel = state.regular, state.reliable
        if not (reg.p_m1 == reg.p_m1) or abs(reg.p_m1) > 1.5:
            return False
        bad = max(reg.p_m1 + reg.p_0, rel.p_m1 + rel.p_0)
        if bad < eps:
            return True
        if prev is not None and abs(bad - prev) < 1e-13 * max(abs(bad), 1e-300):
            return False
        prev = bad
    return False
