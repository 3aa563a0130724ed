"""Standard MU-MIMO-OFDM downlink: bits -> resource grid -> ZF precoding -> echo.

Array conventions (trailing axes, any number of leading batch axes):

    resource grid S   [K, L, W]
    precoder P        [N_t, K, W]
    comm channel H^c  [K, N_t, W]
    sensing chan H^s  [N_r, N_t, W]
    received Y^s      [N_r, L, W]

Gray mapping. Each axis of a square M^2-QAM carries log2(M) bits; the first
half of a symbol's bits drive the in-phase axis and the second half the
quadrature axis. On one axis, amplitude level ``M - 1 - 2 i`` (i = 0..M-1)
carries the Gray code ``i ^ (i >> 1)``, most significant bit first. For QPSK
this gives ``00 -> (1 + 1j) / sqrt(2)``, ``01 -> (1 - 1j) / sqrt(2)``,
``10 -> (-1 + 1j) / sqrt(2)`` and ``11 -> (-1 - 1j) / sqrt(2)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, asdict, field

import numpy as np


class Constellation(str, enum.Enum):
    QPSK = "qpsk"
    QAM16 = "qam16"
    QAM64 = "qam64"

    @property
    def bits_per_symbol(self) -> int:
        return {"qpsk": 2, "qam16": 4, "qam64": 6}[self.value]


def _axis_levels(bits_per_axis: int) -> np.ndarray:
    """Amplitude carried by each Gray-coded bit pattern (indexed by pattern)."""
    m = 1 << bits_per_axis
    levels = np.empty(m)
    for i in range(m):
        levels[i ^ (i >> 1)] = m - 1 - 2 * i
    return levels


def constellation_points(constellation) -> np.ndarray:
    """All points indexed by their bit pattern (MSB first), unit average energy."""
    c = Constellation(constellation)
    half = c.bits_per_symbol // 2
    lev = _axis_levels(half)
    m = len(lev)
    pts = (lev[:, None] + 1j * lev[None, :]).reshape(-1)  # index = (i_bits << half) | q_bits
    return pts / np.sqrt(2.0 * (m * m - 1) / 3.0)


@dataclass
class GridConfig:
    """Resource-grid layout. ``pilot_symbols`` are 1-based positions inside each RB."""

    n_streams: int = 2
    n_subcarriers: int = 128
    n_rb: int = 20
    symbols_per_rb: int = 14
    pilot_symbols: tuple = (3, 12)
    guard_low: int = 5
    guard_high: int = 6
    null_dc: bool = True
    constellation: str = "qpsk"

    def __post_init__(self):
        self.pilot_symbols = tuple(int(p) for p in self.pilot_symbols)
        self.constellation = Constellation(self.constellation).value
        if any(not 1 <= p <= self.symbols_per_rb for p in self.pilot_symbols):
            raise ValueError("pilot symbol positions must lie within the RB")
        if self.n_streams < 1:
            raise ValueError("need at least one stream")
        n_pilots = len(set(self.pilot_symbols)) * self.n_rb
        if 0 < n_pilots < self.n_streams:
            raise ValueError("fewer pilot symbols than streams: pilots cannot be orthogonal")
        if not self.active_subcarriers().any():
            raise ValueError("no active subcarriers left after guards and DC")

    @property
    def n_symbols(self) -> int:
        return self.n_rb * self.symbols_per_rb

    def pilot_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_symbols, dtype=bool)
        for rb in range(self.n_rb):
            for p in self.pilot_symbols:
                mask[rb * self.symbols_per_rb + p - 1] = True
        return mask

    def active_subcarriers(self) -> np.ndarray:
        w = self.n_subcarriers
        mask = np.ones(w, dtype=bool)
        mask[: self.guard_low] = False
        if self.guard_high:
            mask[w - self.guard_high:] = False
        if self.null_dc:
            mask[w // 2] = False
        return mask

    @property
    def n_bits(self) -> int:
        n_data = self.n_symbols - int(self.pilot_mask().sum())
        return (self.n_streams * n_data * int(self.active_subcarriers().sum())
                * Constellation(self.constellation).bits_per_symbol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pilot_symbols"] = list(self.pilot_symbols)
        return d


@dataclass
class ResourceGrid:
    data: np.ndarray          # [K, L, W] complex
    pilot_mask: np.ndarray    # [L] bool
    active: np.ndarray        # [W] bool
    constellation: str = "qpsk"


@dataclass
class SensingObservation:
    y: np.ndarray             # [..., N_r, L, W]
    p: np.ndarray             # [..., N_t, K, W]
    s: np.ndarray             # [..., K, L, W]
    n0: float
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.active is None:
            self.active = np.ones(self.y.shape[-1], dtype=bool)


def generate_bits(n_bits: int, rng: np.random.Generator) -> np.ndarray:
    if n_bits < 0:
        raise ValueError("n_bits must be nonnegative")
    return rng.integers(0, 2, size=n_bits, dtype=np.uint8)


def map_symbols(bits: np.ndarray, constellation) -> np.ndarray:
    c = Constellation(constellation)
    bps = c.bits_per_symbol
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} is not a multiple of {bps}")
    groups = bits.reshape(-1, bps)
    idx = groups @ (1 << np.arange(bps - 1, -1, -1))
    return constellation_points(c)[idx]


def demap_symbols(symbols: np.ndarray, constellation) -> np.ndarray:
    """Hard nearest-point decisions back to bits."""
    c = Constellation(constellation)
    bps = c.bits_per_symbol
    pts = constellation_points(c)
    idx = np.argmin(np.abs(np.ravel(symbols)[:, None] - pts[None, :]), axis=1)
    return ((idx[:, None] >> np.arange(bps - 1, -1, -1)) & 1).astype(np.uint8).reshape(-1)


def pilot_block(n_streams: int, n_pilots: int) -> np.ndarray:
    """[K, n_pilots] unit-modulus pilots with exactly orthogonal rows.

    Row k is the QPSK point (1 + 1j)/sqrt(2) spread by the length-n_pilots DFT
    code of frequency k, so ``B @ B^H = n_pilots * I``.
    """
    j = np.arange(n_pilots)
    k = np.arange(n_streams)
    return (1 + 1j) / np.sqrt(2.0) * np.exp(2j * np.pi * np.outer(k, j) / n_pilots)


def map_to_rg(bits: np.ndarray, grid: GridConfig) -> ResourceGrid:
    """Grid [..., K, L, W] from bits [..., n_bits]; bits fill (stream, symbol, subcarrier) in C order."""
    bits = np.asarray(bits)
    if bits.ndim == 0 or bits.shape[-1] != grid.n_bits:
        raise ValueError(f"expected {grid.n_bits} bits for this grid, got {bits.shape[-1:] or 0}")
    lead = bits.shape[:-1]
    pmask = grid.pilot_mask()
    active = grid.active_subcarriers()
    k, l, w = grid.n_streams, grid.n_symbols, grid.n_subcarriers
    data = np.zeros(lead + (k, l, w), dtype=complex)
    syms = map_symbols(bits.reshape(-1), grid.constellation).reshape(
        lead + (k, int((~pmask).sum()), int(active.sum())))
    dl, da = np.flatnonzero(~pmask), np.flatnonzero(active)
    data[..., dl[:, None], da[None, :]] = syms
    n_p = int(pmask.sum())
    if n_p:
        pl = np.flatnonzero(pmask)
        data[..., pl[:, None], da[None, :]] = pilot_block(k, n_p)[:, :, None]
    return ResourceGrid(data, pmask, active, grid.constellation)


def demap_rg(rg: ResourceGrid) -> np.ndarray:
    sel = rg.data[..., ~rg.pilot_mask, :][..., rg.active]
    return demap_symbols(sel, rg.constellation)


def _w_first(x):
    return np.moveaxis(x, -1, -3)


def _w_last(x):
    return np.moveaxis(x, -3, -1)


MAX_CONDITION = 1e8


def zf_precoder(h_comm: np.ndarray) -> np.ndarray:
    """Column-normalized zero-forcing precoder [..., N_t, K, W].

    ``P_w = pinv(H_w) Xi_w`` with ``Xi_w`` scaling every column of the
    pseudo-inverse to unit norm, so each stream radiates unit power and
    ``H_w P_w = Xi_w`` is diagonal.
    """
    h = _w_first(np.asarray(h_comm))  # [..., W, K, N_t]
    k, nt = h.shape[-2:]
    if k > nt:
        raise ValueError(f"ZF needs K <= N_t, got K={k}, N_t={nt}")
    sv = np.linalg.svd(h, compute_uv=False)
    smin, smax = sv[..., -1], sv[..., 0]
    bad = ~(smin > smax / MAX_CONDITION)
    if np.any(bad):
        w = np.argwhere(bad)[0]
        raise np.linalg.LinAlgError(
            f"communication channel rank-deficient at subcarrier {int(w[-1])} (index {tuple(w)})")
    pinv = np.linalg.pinv(h)  # [..., W, N_t, K]
    pinv = pinv / np.linalg.norm(pinv, axis=-2, keepdims=True)
    return _w_last(pinv)


def stream_gains(h_comm: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Effective per-subcarrier stream matrix H_w P_w, shape [..., K, K, W]."""
    return _w_last(_w_first(h_comm) @ _w_first(p))


def complex_gaussian(shape, n0: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian with E|z|^2 = n0."""
    scale = np.sqrt(n0 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def transmit_and_receive(h_sens, p, s, n0: float, rng=None, noise=None, active=None) -> SensingObservation:
    """Y_w = H_w P_w S_w + Z_w on every subcarrier."""
    if n0 < 0:
        raise ValueError("noise variance must be nonnegative")
    h_sens, p = np.asarray(h_sens), np.asarray(p)
    s_arr = s.data if isinstance(s, ResourceGrid) else np.asarray(s)
    if active is None and isinstance(s, ResourceGrid):
        active = s.active
    if h_sens.shape[-2] != p.shape[-3] or p.shape[-2] != s_arr.shape[-3]:
        raise ValueError(f"incompatible shapes H{h_sens.shape} P{p.shape} S{s_arr.shape}")
    y = _w_last(_w_first(h_sens) @ _w_first(p) @ _w_first(s_arr))
    if noise is not None:
        y = y + noise
    elif n0 > 0:
        if rng is None:
            raise ValueError("rng required when n0 > 0")
        y = y + complex_gaussian(y.shape, n0, rng)
    return SensingObservation(y, p, s_arr, float(n0), active)


def clt_deviation(n_streams: int, n_symbols: int, n_draws: int, rng, constellation="qpsk") -> np.ndarray:
    """||S S^H / L - I||_F for ``n_draws`` random data blocks S [K, L]."""
    bps = Constellation(constellation).bits_per_symbol
    bits = rng.integers(0, 2, size=n_draws * n_streams * n_symbols * bps)
    s = map_symbols(bits, constellation).reshape(n_draws, n_streams, n_symbols)
    g = s @ np.conj(np.swapaxes(s, -1, -2)) / n_symbols
    return np.linalg.norm(g - np.eye(n_streams), axis=(-2, -1))
