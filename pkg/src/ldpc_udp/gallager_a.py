"""Density evolution for the hard-decision (Gallager A) decoder on the BSC.

Covers the uniform, UDP, and doping setups, the closed-form threshold
machinery (contraction bound gamma, smallest fixed-point root eta), and the
3-term binomial threshold approximations for dv in {3, 4}.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ensemble import EnsembleSpec, ProtectionMode, design_rate

DE_EPS = 1e-9
DE_CAP = 5000
ROOT_SCAN_STEP = 1e-4
ROOT_TOL = 1e-7
BISECT_TOL = 1e-5


class NoRootInRange(Exception):
    """The fixed-point polynomial has no sign change in (0, 0.5)."""


class UnsupportedDegree(Exception):
    """Closed-form approximations exist only for dv in {3, 4}."""


@dataclass(frozen=True)
class GaState:
    p_err: float
    pbar_err: float
    iter: int = 0


@dataclass(frozen=True)
class ExactThresholdParts:
    gamma: float
    eta: float
    threshold: float
    binding: str  # "gamma" or "eta"


def _step(p0: float, s: float, dv: int) -> float:
    a = (1.0 + s) / 2.0
    b = (1.0 - s) / 2.0
    return p0 - p0 * a ** (dv - 1) + (1.0 - p0) * b ** (dv - 1)


def ga_step_uniform(p0: float, p_prev: float, dv: int, dc: int) -> float:
    """One uniform DE iteration: error probability after message passing."""
    return _step(p0, (1.0 - 2.0 * p_prev) ** (dc - 1), dv)


def ga_step_udp(p0: float, pbar0: float, state: GaState, spec: EnsembleSpec) -> GaState:
    """One UDP DE iteration updating the regular and reliable populations.

    The check-side sign product toward a regular VN mixes x reliable and
    dc-1-x regular inputs; toward a reliable VN, x-1 and dc-x.
    """
    x, dc, dv = spec.x, spec.dc, spec.dv
    sbar = 1.0 - 2.0 * state.pbar_err
    s = 1.0 - 2.0 * state.p_err
    p_next = _step(p0, sbar**x * s ** (dc - 1 - x), dv)
    pbar_next = _step(pbar0, sbar ** (x - 1) * s ** (dc - x), dv)
    return GaState(p_next, pbar_next, state.iter + 1)


def ga_step_doping(p0: float, p_prev: float, spec: EnsembleSpec) -> float:
    """One doping DE iteration: parity bits known, exponent drops to dc-1-x."""
    return _step(p0, (1.0 - 2.0 * p_prev) ** (spec.dc - 1 - spec.x), dv=spec.dv)


def gamma_uniform(dv: int, dc: int) -> float:
    """Contraction bound 1/((dv-1)(dc-1)) from the map slope at zero error."""
    return 1.0 / ((dv - 1) * (dc - 1))


def gamma_doping(spec: EnsembleSpec) -> float:
    """Doping contraction bound, averaged over all nodes: weighted by the rate."""
    return design_rate(spec) / ((spec.dv - 1) * (spec.dc - 1 - spec.x))


def fixed_point_poly(y: float, dv: int, k: int) -> float:
    """p(y) whose smallest positive root is the one-step fixed point of the map."""
    s = (1.0 - 2.0 * y) ** k
    a = (1.0 + s) / 2.0
    b = (1.0 - s) / 2.0
    return y * a ** (dv - 1) + (y - 1.0) * b ** (dv - 1)


def eta_root(dv: int, k: int) -> float:
    """Smallest positive root of the fixed-point polynomial in (0, 0.5).

    Sign-scan at ROOT_SCAN_STEP, then bisection to ROOT_TOL. Callers in the
    doping setup weight the returned root by the design rate.
    """
    y_prev = ROOT_SCAN_STEP
    f_prev = fixed_point_poly(y_prev, dv, k)
    y = y_prev + ROOT_SCAN_STEP
    while y < 0.5:
        f = fixed_point_poly(y, dv, k)
        if (f_prev > 0.0) != (f > 0.0):
            lo, hi = y_prev, y
            while hi - lo > ROOT_TOL:
                mid = 0.5 * (lo + hi)
                if (fixed_point_poly(mid, dv, k) > 0.0) == (f_prev > 0.0):
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        y_prev, f_prev = y, f
        y += ROOT_SCAN_STEP
    raise NoRootInRange(f"no sign change in (0, 0.5) for dv={dv}, k={k}")


def exact_threshold(spec: EnsembleSpec, mode: ProtectionMode) -> ExactThresholdParts:
    """Exact threshold min(gamma, eta) for the uniform or doping setup."""
    if mode is ProtectionMode.UNIFORM:
        gam = gamma_uniform(spec.dv, spec.dc)
        eta = eta_root(spec.dv, spec.dc - 1)
    elif mode is ProtectionMode.DOPING:
        gam = gamma_doping(spec)
        eta = eta_root(spec.dv, spec.dc - 1 - spec.x) * design_rate(spec)
    else:
        raise ValueError("exact threshold machinery covers uniform and doping only")
    if gam <= eta:
        return ExactThresholdParts(gam, eta, gam, "gamma")
    return ExactThresholdParts(gam, eta, eta, "eta")


def _approx_poly(p: float, dv: int, k: int) -> float:
    # 3-term binomial truncation of the fixed-point polynomial, divided by y
    return (
        (dv - 1) * k * p
        - (dv - 1) * k * (k * dv / 2.0 - 1.0) * p * p
        - k ** (dv - 1) * p ** (dv - 1)
        + k ** (dv - 1) * p ** (dv - 2)
        - 1.0
    )


def _smallest_positive_root(g, hi: float = 0.5) -> float:
    step = 1e-6
    y = step
    f_prev = g(y)
    y += step
    while y < hi:
        f = g(y)
        if (f_prev > 0.0) != (f > 0.0):
            lo, up = y - step, y
            for _ in range(80):
                mid = 0.5 * (lo + up)
                if (g(mid) > 0.0) == (f_prev > 0.0):
                    lo = mid
                else:
                    up = mid
            return 0.5 * (lo + up)
        f_prev = f
        y += step
    raise NoRootInRange("approximation polynomial has no root in range")


def approx_threshold(spec: EnsembleSpec, mode: ProtectionMode) -> float:
    """Closed-form threshold approximation (3 binomial terms of the sign product).

    dv = 3 reduces to a quadratic, solved in closed form; dv = 4 yields a cubic,
    solved numerically for its smallest positive root. Doping results are
    averaged over all nodes via the rate factor.
    """
    if spec.dv not in (3, 4):
        raise UnsupportedDegree(f"approximation derived for dv in {{3,4}}, got dv={spec.dv}")
    if mode is ProtectionMode.UNIFORM:
        k, scale = spec.dc - 1, 1.0
    elif mode is ProtectionMode.DOPING:
        k, scale = spec.dc - 1 - spec.x, design_rate(spec)
    else:
        raise ValueError("approximation covers uniform and doping only")
    if spec.dv == 3:
        a = 4.0 * k * k - 2.0 * k
        b = -(k * k + 2.0 * k)
        disc = b * b - 4.0 * a
        if disc < 0:
            raise NoRootInRange(f"negative discriminant for k={k}")
        root = (-b - disc**0.5) / (2.0 * a)
    else:
        root = _smallest_positive_root(lambda p: _approx_poly(p, spec.dv, k))
    return root * scale


def de_converges(p0: float, pbar0: float, spec: EnsembleSpec, mode: ProtectionMode,
                 eps: float = DE_EPS, cap: int = DE_CAP) -> bool:
    """Run the DE recursion; True iff both error populations fall below eps.

    A plateau (relative change < 1e-12 while above eps) counts as divergence.
    """
    if p0 <= 0.0 and pbar0 <= 0.0:
        return True
    dv, dc, x = spec.dv, spec.dc, spec.x
    if mode is ProtectionMode.UNIFORM:
        p = p0
        prev = None
        for _ in range(cap):
            p = ga_step_uniform(p0, p, dv, dc)
            if p < eps:
                return True
            if prev is not None and abs(p - prev) < 1e-12 * p:
                return False
            prev = p
        return False
    if mode is ProtectionMode.DOPING:
        p = p0
        prev = None
        for _ in range(cap):
            p = ga_step_doping(p0, p, spec)
            if p < eps:
                return True
            if prev is not None and abs(p - prev) < 1e-12 * p:
                return False
            prev = p
        return False
    state = GaState(p0, pbar0)
    prev = None
    for _ in range(cap):
        state = ga_step_udp(p0, pbar0, state, spec)
        worst = max(state.p_err, state.pbar_err)
        if worst < eps:
            return True
        if prev is not None and abs(worst - prev) < 1e-12 * worst:
            return False
        prev = worst
    return False


def ga_de_threshold(spec: EnsembleSpec, mode: ProtectionMode,
                    pbar_policy=None, tol: float = BISECT_TOL) -> float:
    """Numerical DE threshold by bisection on the initial error probability.

    pbar_policy maps a probed p0 to the reliable-population p0; defaults per
    mode (uniform: p0, doping: 0). Doping reports p* scaled by the rate,
    uniform reports p* as is.
    """
    if pbar_policy is None:
        pbar_policy = {
            ProtectionMode.UNIFORM: lambda p: p,
            ProtectionMode.DOPING: lambda p: 0.0,
            ProtectionMode.UDP: lambda p: 0.0,
        }[mode]
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if de_converges(mid, pbar_policy(mid), spec, mode):
            lo = mid
        else:
            hi = mid
    if mode is ProtectionMode.DOPING:
        return lo * design_rate(spec)
    return lo
