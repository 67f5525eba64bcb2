"""Quantized density evolution for the full belief-propagation decoder.

Messages are log-likelihood ratios L = log(p0/p1); their distributions are
tracked on a uniform LLR lattice. Variable-node updates convolve densities on
that lattice. Check-node updates move to the (sign, -log|p0-p1|) domain where
the product rule becomes addition: sign bits add over GF(2) and magnitude
densities convolve, computed with FFTs.

Out-of-range LLR mass saturates at the extreme bins; out-of-range magnitude
mass lands in an overflow bin that returns to the zero-LLR bin (a magnitude
beyond the lattice carries no usable sign information). Magnitude bin 0
returns to the saturation LLR so that certainty survives the round trip.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len, rfft, irfft

from .ensemble import EnsembleSpec, ProtectionMode

DE_EPS = 1e-7
DE_CAP = 1000
# one iteration of non-decrease (relative 1e-7) counts as divergence
STALL_FACTOR = 1.0 - 1e-7

DENSITY_MAGIC = b"LLRD"


class GridTooNarrow(Exception):
    """Channel LLR falls outside the lattice."""


class GridMismatch(Exception):
    """Densities from different grids cannot be combined."""


class LlrGrid:
    """Uniform LLR lattice [-M, M] with 2^bits + 1 points (exact zero bin),
    plus the magnitude lattice [0, mag_max] with 2^mag_bits bins + overflow."""

    def __init__(self, llr_halfwidth: float = 25.0, bits: int = 13,
                 mag_max: float = 25.0, mag_bits: int = 13):
        self.M = float(llr_halfwidth)
        self.half = 2 ** (bits - 1)
        self.n = 2 * self.half + 1
        self.delta = self.M / self.half
        self.llr = (np.arange(self.n) - self.half) * self.delta
        self.nm = 2 ** mag_bits
        self.mag_max = float(mag_max)
        self.dm = self.mag_max / self.nm
        absL = np.abs(self.llr)
        t = np.tanh(absL / 2.0)
        with np.errstate(divide="ignore"):
            self.mag_of_llr = np.where(t > 0.0, -np.log(np.maximum(t, 1e-300)), np.inf)
        centers = (np.arange(self.nm) + 0.5) * self.dm
        llr_back = 2.0 * np.arctanh(np.exp(-centers))
        llr_back[0] = self.M  # bin 0 holds stronger-than-representable certainty
        self.llr_of_mag = llr_back

    def index_of(self, llr_value: float) -> int:
        idx = int(round(llr_value / self.delta)) + self.half
        if not 0 <= idx < self.n:
            raise GridTooNarrow(f"LLR {llr_value} outside [-{self.M}, {self.M}]")
        return idx

    def __eq__(self, other):
        return (isinstance(other, LlrGrid) and self.M == other.M
                and self.n == other.n and self.nm == other.nm
                and self.mag_max == other.mag_max)


DEFAULT_GRID = None


def default_grid() -> LlrGrid:
    global DEFAULT_GRID
    if DEFAULT_GRID is None:
        DEFAULT_GRID = LlrGrid()
    return DEFAULT_GRID


@dataclass(frozen=True)
class LlrDensity:
    grid: LlrGrid
    mass: np.ndarray  # length grid.n, nonnegative, sums to 1

    def error_probability(self) -> float:
        """Mass on negative LLRs plus half the zero bin."""
        g = self.grid
        return float(self.mass[: g.half].sum() + 0.5 * self.mass[g.half])

    def total_mass(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True)
class SignMagDensity:
    grid: LlrGrid
    mag0: np.ndarray   # magnitude mass with sign bit 0 (positive LLR)
    mag1: np.ndarray   # sign bit 1 (negative LLR)
    overflow0: float
    overflow1: float

    def total_mass(self) -> float:
        return float(self.mag0.sum() + self.mag1.sum() + self.overflow0 + self.overflow1)


def _normalized(mass: np.ndarray) -> np.ndarray:
    np.maximum(mass, 0.0, out=mass)
    s = mass.sum()
    if s > 0.0:
        mass /= s
    return mass


def bsc_initial_density(p: float, grid: LlrGrid | None = None) -> LlrDensity:
    """Two-point BSC prior: mass 1-p at +log((1-p)/p), mass p at the mirror."""
    grid = grid or default_grid()
    if not 0.0 < p < 0.5:
        raise ValueError(f"p must be in (0, 0.5), got {p}")
    l0 = np.log((1.0 - p) / p)
    mass = np.zeros(grid.n)
    mass[grid.index_of(l0)] = 1.0 - p
    mass[grid.index_of(-l0)] = p
    return LlrDensity(grid, mass)


def saturated_density(grid: LlrGrid | None = None, positive: bool = True) -> LlrDensity:
    """Point mass at the saturation LLR (known-bit limit)."""
    grid = grid or default_grid()
    mass = np.zeros(grid.n)
    mass[-1 if positive else 0] = 1.0
    return LlrDensity(grid, mass)


def _check_same_grid(*densities: LlrDensity) -> LlrGrid:
    g = densities[0].grid
    for d in densities[1:]:
        if d.grid != g:
            raise GridMismatch("densities live on different grids")
    return g


def vn_update_bp(channel: LlrDensity, incoming: LlrDensity, dv: int) -> LlrDensity:
    """Channel density convolved with dv-1 copies of the incoming density;
    out-of-range mass saturates at the extreme bins."""
    g = _check_same_grid(channel, incoming)
    copies = dv - 1
    fftlen = next_fast_len((copies + 1) * (g.n - 1) + 1)
    out = irfft(rfft(channel.mass, fftlen) * rfft(incoming.mass, fftlen) ** copies, fftlen)
    shift = (copies + 1) * g.half  # index of LLR 0 in the full linear result
    res = out[shift - g.half: shift + g.half + 1].copy()
    res[0] += out[: shift - g.half].sum()
    res[-1] += out[shift + g.half + 1:].sum()
    return LlrDensity(g, _normalized(res))


def to_sign_mag(d: LlrDensity) -> SignMagDensity:
    """Transform to the GF(2) x magnitude domain with linear mass splitting."""
    g = d.grid
    mag0 = np.zeros(g.nm)
    mag1 = np.zeros(g.nm)
    ov = [0.0, 0.0]
    zero_mass = d.mass[g.half]
    ov[0] += 0.5 * zero_mass
    ov[1] += 0.5 * zero_mass
    for sign, sl in ((0, slice(g.half + 1, g.n)), (1, slice(0, g.half))):
        w = d.mass[sl]
        m = g.mag_of_llr[sl]
        u = m / g.dm - 0.5
        i0 = np.floor(u).astype(int)
        frac = u - i0
        tgt = (mag0, mag1)[sign]
        for idx, part in ((i0, w * (1.0 - frac)), (i0 + 1, w * frac)):
            inside = (idx >= 0) & (idx < g.nm)
            np.add.at(tgt, np.clip(idx, 0, g.nm - 1), np.where(inside, part, 0.0))
            tgt[0] += part[idx < 0].sum()
            ov[sign] += part[idx >= g.nm].sum()
    return SignMagDensity(g, mag0, mag1, ov[0], ov[1])


def from_sign_mag(s: SignMagDensity) -> LlrDensity:
    """Back to the LLR lattice; overflow mass returns to the zero bin."""
    g = s.grid
    mass = np.zeros(g.n)
    L = g.llr_of_mag
    u = L / g.delta
    i0 = np.floor(u).astype(int)
    frac = u - i0
    for sign, f in ((0, s.mag0), (1, s.mag1)):
        direction = 1 if sign == 0 else -1
        for idx, part in ((i0, f * (1.0 - frac)), (i0 + 1, f * frac)):
            pos = g.half + direction * idx
            np.add.at(mass, np.clip(pos, 0, g.n - 1), part)
    mass[g.half] += s.overflow0 + s.overflow1
    return LlrDensity(g, _normalized(mass))


def cn_update_bp(reliable: LlrDensity | None, regular: LlrDensity,
                 alpha: int, beta: int) -> LlrDensity:
    """Distribution of the product over alpha reliable and beta regular edges.

    Sign bits add over GF(2) and magnitudes convolve; both are handled at once
    by convolving F = f0 + f1 and G = f0 - f1 (FFT powers on the magnitude
    lattice) and recombining. The uniform case is alpha = 0.
    """
    if alpha and reliable is None:
        raise ValueError("alpha > 0 requires a reliable density")
    g = regular.grid if reliable is None else _check_same_grid(reliable, regular)
    total = alpha + beta
    fftlen = next_fast_len(total * g.nm + 1)

    def transforms(d: LlrDensity):
        s = to_sign_mag(d)
        F = s.mag0 + s.mag1
        G = s.mag0 - s.mag1
        tF = F.sum() + s.overflow0 + s.overflow1
        tG = G.sum() + s.overflow0 - s.overflow1
        return rfft(F, fftlen), rfft(G, fftlen), tF, tG

    Freg, Greg, tFreg, tGreg = transforms(regular)
    if alpha:
        Frel, Grel, tFrel, tGrel = transforms(reliable)
        Ff = Frel**alpha * Freg**beta
        Gf = Grel**alpha * Greg**beta
        tF = tFrel**alpha * tFreg**beta
        tG = tGrel**alpha * tGreg**beta
    else:
        Ff, Gf = Freg**beta, Greg**beta
        tF, tG = tFreg**beta, tGreg**beta
    F = irfft(Ff, fftlen)[: g.nm]
    G = irfft(Gf, fftlen)[: g.nm]
    ovF = max(tF - F.sum(), 0.0)
    ovG = tG - G.sum()
    mag0 = np.maximum(0.5 * (F + G), 0.0)
    mag1 = np.maximum(0.5 * (F - G), 0.0)
    ov0 = max(0.5 * (ovF + ovG), 0.0)
    ov1 = max(0.5 * (ovF - ovG), 0.0)
    return from_sign_mag(SignMagDensity(g, mag0, mag1, ov0, ov1))


def bp_de_run(spec: EnsembleSpec, mode: ProtectionMode, p: float, pbar: float,
              grid: LlrGrid | None = None, eps: float = DE_EPS,
              cap: int = DE_CAP) -> tuple[list[tuple[float, float]], bool]:
    """Track message densities; converged iff both populations' error
    probability (negative mass + half the zero bin) falls below eps.

    Returns the per-iteration (regular, reliable) error-probability trajectory;
    its first entry is the channel prior, so trajectory[0][0] == p exactly.
    """
    grid = grid or default_grid()
    if p <= 0.0:
        return [(0.0, 0.0)], True
    dv, dc, x = spec.dv, spec.dc, spec.x
    ch_reg = bsc_initial_density(p, grid)
    if mode is ProtectionMode.UNIFORM:
        ch_rel = None
    elif mode is ProtectionMode.DOPING:
        ch_rel = saturated_density(grid)
    else:
        ch_rel = bsc_initial_density(pbar, grid) if pbar > 0.0 else saturated_density(grid)
    reg, rel = ch_reg, ch_rel
    traj = [(reg.error_probability(), rel.error_probability() if rel else reg.error_probability())]
    prev = None
    converged = False
    for _ in range(cap):
        if mode is ProtectionMode.UNIFORM:
            q_reg = cn_update_bp(None, reg, 0, dc - 1)
            reg = vn_update_bp(ch_reg, q_reg, dv)
            e_reg = e_rel = reg.error_probability()
        else:
            q_reg = cn_update_bp(rel, reg, x, dc - 1 - x)
            q_rel = cn_update_bp(rel, reg, x - 1, dc - x)
            reg = vn_update_bp(ch_reg, q_reg, dv)
            if mode is not ProtectionMode.DOPING:
                rel = vn_update_bp(ch_rel, q_rel, dv)
            e_reg = reg.error_probability()
            e_rel = rel.error_probability() if mode is not ProtectionMode.DOPING else 0.0
        traj.append((e_reg, e_rel))
        worst = max(e_reg, e_rel)
        if worst < eps:
            converged = True
            break
        progress = e_reg + e_rel
        if prev is not None and progress >= prev * STALL_FACTOR:
            break
        prev = progress
    return traj, converged


def dump_density(d: LlrDensity, fh) -> None:
    """Binary dump: magic, halfwidth, point count, then float64 masses."""
    fh.write(DENSITY_MAGIC)
    np.array([d.grid.M], dtype="<f8").tofile(fh)
    np.array([d.grid.n], dtype="<i8").tofile(fh)
    np.asarray(d.mass, dtype="<f8").tofile(fh)


def load_density(fh, grid: LlrGrid | None = None) -> LlrDensity:
    if fh.read(4) != DENSITY_MAGIC:
        raise ValueError("not a density dump")
    M = float(np.fromfile(fh, dtype="<f8", count=1)[0])
    n = int(np.fromfile(fh, dtype="<i8", count=1)[0])
    mass = np.fromfile(fh, dtype="<f8", count=n)
    grid = grid or default_grid()
    if grid.n != n or grid.M != M:
        raise GridMismatch(f"dump grid (M={M}, n={n}) differs from target")
    return LlrDensity(grid, mass)
