"""Point-scatterer frequency-domain channels.

Stand-in for a ray tracer. Every path is a single bounce off an isotropic point
scatterer, evaluated with exact per-element distances (spherical wavefronts):

    H[r, t, w] = sum_p  rho_p * g0 / (d(t, p) * d(p, r)) * exp(-j 2 pi f_w tau)
    tau        = (d(t, p) + d(p, r)) / c,     g0 = c / (4 pi f_c)

The sensing channel adds a direct Tx->Rx leakage path scaled by
``leakage_db`` and a fixed set of wall scatterers drawn once per ``env_seed``.
The communication channel adds the Tx->UE line of sight with amplitude
``g0 / d``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .geometry_maps import Scene
from .scene_gen import STREAM_ENV, rng_for

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
MIN_DISTANCE_M = 1e-3


@dataclass(frozen=True)
class ArrayGeometry:
    element_positions: np.ndarray
    carrier_freq_hz: float = 6e9

    @property
    def n_elements(self) -> int:
        return len(self.element_positions)


def ula(center, n_elements: int, carrier_freq_hz: float = 6e9, axis=(0.0, 1.0, 0.0)) -> ArrayGeometry:
    """Half-wavelength uniform linear array centered at ``center``.

    The default axis (y) makes the array broadside face +x, i.e. toward the
    room center for a transceiver mounted near the x = -2.5 m wall.
    """
    if n_elements < 1:
        raise ValueError("array needs at least one element")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    spacing = SPEED_OF_LIGHT / (2.0 * carrier_freq_hz)
    offsets = (np.arange(n_elements) - (n_elements - 1) / 2.0) * spacing
    pos = np.asarray(center, dtype=float)[None, :] + offsets[:, None] * axis[None, :]
    return ArrayGeometry(pos, float(carrier_freq_hz))


@dataclass
class ChannelConfig:
    bandwidth_hz: float = 40e6
    n_subcarriers: int = 128
    carrier_freq_hz: float = 6e9
    n_env_scatterers: int = 32
    env_reflectivity: float = 0.7
    scatterers_per_target_face: int = 4
    target_reflectivity: float = 1.0
    leakage_db: float = -40.0
    noise_figure_db: float = 9.0
    antenna_temp_K: float = 290.0
    tx_power_w: float = 0.01

    def __post_init__(self):
        if self.n_subcarriers < 8:
            raise ValueError("need at least 8 subcarriers")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        side = int(round(np.sqrt(self.scatterers_per_target_face)))
        if side * side != self.scatterers_per_target_face:
            raise ValueError("scatterers_per_target_face must be a perfect square")

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers

    def to_dict(self) -> dict:
        return asdict(self)


def subcarrier_frequencies(config: ChannelConfig) -> np.ndarray:
    """Absolute subcarrier frequencies, symmetric about the carrier."""
    w = np.arange(config.n_subcarriers)
    return config.carrier_freq_hz + (w - (config.n_subcarriers - 1) / 2.0) * config.subcarrier_spacing_hz


def noise_variance(config: ChannelConfig) -> float:
    """Thermal noise power per subcarrier, k_B T (B / W) NF."""
    return (BOLTZMANN * config.antenna_temp_K * config.subcarrier_spacing_hz
            * 10.0 ** (config.noise_figure_db / 10.0))


def effective_noise_variance(config: ChannelConfig, n_streams: int, n_active: int) -> float:
    """Noise variance relative to unit-energy symbols on unit-norm precoder columns.

    The link layer works with unit-energy symbols; spreading ``tx_power_w``
    evenly over ``n_streams`` streams on ``n_active`` subcarriers makes each
    stream carry ``p = tx_power_w / (n_streams * n_active)`` per resource
    element, which is the same as leaving the signal at unit power and
    dividing the noise by ``p``.
    """
    p = config.tx_power_w / (n_streams * n_active)
    return noise_variance(config) / p


def env_scatterers(box_extents, n: int, env_seed: int, reflectivity: float = 0.7):
    """Wall, floor and ceiling scatterers of the environment box.

    Points are uniform over the box surface (area weighted). The wall behind
    the transceiver (x = -x_max) is left out: a real base-station pattern puts
    it deep in the back lobe, while isotropic elements 10 cm away would let it
    swamp everything else.
    """
    rng = rng_for(env_seed, STREAM_ENV, 0)
    bx, by, bz = (float(v) for v in box_extents)
    hx, hy = bx / 2.0, by / 2.0
    # (fixed axis, fixed value, area)
    faces = [
        (0, hx, by * bz),
        (1, -hy, bx * bz),
        (1, hy, bx * bz),
        (2, 0.0, bx * by),
        (2, bz, bx * by),
    ]
    areas = np.array([f[2] for f in faces])
    which = rng.choice(len(faces), size=n, p=areas / areas.sum())
    lo = np.array([-hx, -hy, 0.0])
    hi = np.array([hx, hy, bz])
    pts = rng.uniform(lo, hi, size=(n, 3))
    for k, (axis, value, _) in enumerate(faces):
        pts[which == k, axis] = value
    return pts, np.full(n, float(reflectivity))


def target_scatterers(scene: Scene, per_face: int, reflectivity: float = 1.0):
    """Regular lattice on the four vertical faces of every target cuboid."""
    side = int(round(np.sqrt(per_face)))
    u = (np.arange(side) + 0.5) / side * 2.0 - 1.0  # in (-1, 1)
    a, b = np.meshgrid(u, u, indexing="ij")
    a, b = a.ravel(), b.ravel()
    pts = []
    for t in scene.targets:
        c = np.asarray(t.center, dtype=float)
        h = np.asarray(t.half_extents, dtype=float)
        for axis in (0, 1):
            other = 1 - axis
            for sign in (-1.0, 1.0):
                p = np.empty((len(a), 3))
                p[:, axis] = c[axis] + sign * h[axis]
                p[:, other] = c[other] + a * h[other]
                p[:, 2] = c[2] + b * h[2]
                pts.append(p)
    if not pts:
        return np.zeros((0, 3)), np.zeros(0)
    pts = np.concatenate(pts)
    return pts, np.full(len(pts), float(reflectivity))


@njit(cache=True)
def _path_sum_loops(tx, rx, pts, refl, freqs, g0):
    nt, nr, npt, nw = tx.shape[0], rx.shape[0], pts.shape[0], freqs.shape[0]
    out = np.zeros((nr, nt, nw), dtype=np.complex128)
    for p in range(npt):
        for t in range(nt):
            dt = np.sqrt(np.sum((tx[t] - pts[p]) ** 2))
            for r in range(nr):
                dr = np.sqrt(np.sum((rx[r] - pts[p]) ** 2))
                amp = refl[p] * g0 / (dt * dr)
                tau = (dt + dr) / 299_792_458.0
                for w in range(nw):
                    ph = -2.0 * np.pi * freqs[w] * tau
                    out[r, t, w] += amp * (np.cos(ph) + 1j * np.sin(ph))
    return out


def _path_sum_numpy(tx, rx, pts, refl, freqs, g0):
    dt = np.linalg.norm(tx[None, :, :] - pts[:, None, :], axis=-1)  # [P, Nt]
    dr = np.linalg.norm(rx[None, :, :] - pts[:, None, :], axis=-1)  # [P, Nr]
    amp = refl[:, None, None] * g0 / (dr[:, :, None] * dt[:, None, :])
    tau = (dr[:, :, None] + dt[:, None, :]) / SPEED_OF_LIGHT  # [P, Nr, Nt]
    phase = np.exp(-2j * np.pi * tau[..., None] * freqs)
    return np.einsum("prt,prtw->rtw", amp, phase)


def path_sum(tx, rx, pts, refl, freqs, g0) -> np.ndarray:
    """Single-bounce channel [Nr, Nt, W] through the points ``pts``."""
    tx, rx = np.ascontiguousarray(tx, float), np.ascontiguousarray(rx, float)
    pts = np.ascontiguousarray(np.reshape(pts, (-1, 3)), float)
    refl = np.ascontiguousarray(refl, float)
    freqs = np.ascontiguousarray(freqs, float)
    if len(pts):
        d = np.linalg.norm(np.concatenate([tx, rx])[None] - pts[:, None], axis=-1)
        if d.min() < MIN_DISTANCE_M:
            raise ValueError("scatterer collocated with an antenna element (< 1 mm)")
    if not len(pts):
        return np.zeros((len(rx), len(tx), len(freqs)), dtype=complex)
    if HAVE_NUMBA:
        return _path_sum_loops(tx, rx, pts, refl, freqs, float(g0))
    return _path_sum_numpy(tx, rx, pts, refl, freqs, float(g0))


def direct_paths(tx, rx, freqs, g0, gain: float = 1.0) -> np.ndarray:
    """Free-space line of sight from every tx element to every rx point."""
    d = np.linalg.norm(np.asarray(rx)[:, None, :] - np.asarray(tx)[None, :, :], axis=-1)
    if d.min() < MIN_DISTANCE_M:
        raise ValueError("receiver collocated with a transmit element (< 1 mm)")
    amp = gain * g0 / d
    return amp[..., None] * np.exp(-2j * np.pi * (d / SPEED_OF_LIGHT)[..., None] * freqs)


def _g0(config: ChannelConfig) -> float:
    return SPEED_OF_LIGHT / (4.0 * np.pi * config.carrier_freq_hz)


def static_sensing_channel(config: ChannelConfig, tx_array: ArrayGeometry, rx_array: ArrayGeometry,
                           box_extents, env_seed: int) -> np.ndarray:
    """Target-independent part of the sensing channel: environment plus leakage."""
    freqs = subcarrier_frequencies(config)
    g0 = _g0(config)
    tx, rx = tx_array.element_positions, rx_array.element_positions
    out = np.zeros((len(rx), len(tx), len(freqs)), dtype=complex)
    if config.n_env_scatterers > 0:
        pts, refl = env_scatterers(box_extents, config.n_env_scatterers, env_seed,
                                   config.env_reflectivity)
        out += path_sum(tx, rx, pts, refl, freqs, g0)
    leak = 10.0 ** (config.leakage_db / 20.0)
    if leak > 0.0:
        out += direct_paths(tx, rx, freqs, g0, gain=leak)
    return out


def synthesize_sensing_channel(scene: Scene, config: ChannelConfig, tx_array: ArrayGeometry,
                               rx_array: ArrayGeometry, env_seed: int) -> np.ndarray:
    """Sensing CSI [N_r, N_t, W]."""
    freqs = subcarrier_frequencies(config)
    pts, refl = target_scatterers(scene, config.scatterers_per_target_face,
                                  config.target_reflectivity)
    h = path_sum(tx_array.element_positions, rx_array.element_positions, pts, refl, freqs,
                 _g0(config))
    return h + static_sensing_channel(config, tx_array, rx_array, scene.box_extents, env_seed)


def synthesize_comm_channel(scene: Scene, config: ChannelConfig, tx_array: ArrayGeometry,
                            ue_positions, env_seed: int) -> np.ndarray:
    """Communication CSI [K, N_t, W] toward single-antenna UEs."""
    freqs = subcarrier_frequencies(config)
    g0 = _g0(config)
    tx = tx_array.element_positions
    ues = np.asarray(ue_positions, dtype=float).reshape(-1, 3)
    h = direct_paths(tx, ues, freqs, g0)
    pts, refl = target_scatterers(scene, config.scatterers_per_target_face,
                                  config.target_reflectivity)
    if config.n_env_scatterers > 0:
        epts, erefl = env_scatterers(scene.box_extents, config.n_env_scatterers, env_seed,
                                     config.env_reflectivity)
        pts, refl = np.concatenate([pts, epts]), np.concatenate([refl, erefl])
    if len(pts):
        h = h + path_sum(tx, ues, pts, refl, freqs, g0)
    return h
