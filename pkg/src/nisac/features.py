"""NN input features from estimated sensing CSI.

Every function accepts leading batch axes; the last three axes are always
[N_r, N_t (or channel), W].
"""

from __future__ import annotations

import enum

import numpy as np

from .ofdm_link import _w_first, _w_last
from .sensing_estimator import hermitian_solve, herm, ls_pinv


class FeatureKind(str, enum.Enum):
    BEAM_DELAY = "beam_delay"
    DIRECT = "direct"


class Fusion(str, enum.Enum):
    SUB = "sub"
    STA = "sta"
    NOR = "nor"


def beamspace_delay_transform(h: np.ndarray) -> np.ndarray:
    """Unitary DFT over rx and tx antennas, unitary IDFT over subcarriers."""
    x = np.fft.fft(h, axis=-3, norm="ortho")
    x = np.fft.fft(x, axis=-2, norm="ortho")
    return np.fft.ifft(x, axis=-1, norm="ortho")


def beamspace_delay_features(h: np.ndarray) -> np.ndarray:
    return np.abs(beamspace_delay_transform(h))


def direct_features(h: np.ndarray) -> np.ndarray:
    """Real parts of all subcarriers followed by imaginary parts: [N_r, N_t, 2W]."""
    return np.concatenate([h.real, h.imag], axis=-1)


def from_direct_features(f: np.ndarray) -> np.ndarray:
    w = f.shape[-1] // 2
    return f[..., :w] + 1j * f[..., w:]


def extract(h: np.ndarray, kind) -> np.ndarray:
    if FeatureKind(kind) is FeatureKind.BEAM_DELAY:
        return beamspace_delay_features(h)
    return direct_features(h)


def precoding_imposed_reference(h_ref, p, s, lambda_reg: float, active=None) -> np.ndarray:
    """Reference CSI seen through the same precoder, symbols and regularizer.

    H_ref,w G_w (G_w + lam I)^-1 with G_w = P_w S_w S_w^H P_w^H. At
    ``lambda_reg == 0`` the regularized inverse is replaced by the
    pseudo-inverse, which turns G_w (G_w)^+ into the LS projector.
    """
    h_ref, p, s = np.asarray(h_ref), np.asarray(p), np.asarray(s)
    w = p.shape[-1]
    act = np.ones(w, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    hr = _w_first(h_ref)[..., act, :, :]
    a = _w_first(p)[..., act, :, :] @ _w_first(s)[..., act, :, :]
    g = a @ herm(a)
    nt = g.shape[-1]
    if lambda_reg == 0:
        proj = a @ ls_pinv(a)
        out_act = hr @ proj
    else:
        # X (G + lam I) = H_ref G   <=>   (G + lam I) X^H = G H_ref^H
        rhs = g @ herm(hr)
        lead = np.broadcast_shapes(g.shape[:-2], rhs.shape[:-2])
        reg = np.broadcast_to(g + lambda_reg * np.eye(nt), lead + (nt, nt))
        out_act = herm(hermitian_solve(reg, np.broadcast_to(rhs, lead + rhs.shape[-2:])))
    lead = out_act.shape[:-3]
    out = np.zeros(lead + (w,) + out_act.shape[-2:], dtype=complex)
    out[..., act, :, :] = out_act
    return _w_last(out)


def fuse(f_est: np.ndarray, f_ref, mode) -> np.ndarray:
    mode = Fusion(mode)
    if mode is Fusion.NOR:
        return f_est
    f_ref = np.asarray(f_ref)
    if f_ref.shape[-3:] != f_est.shape[-3:]:
        raise ValueError(f"feature shapes differ: {f_est.shape} vs {f_ref.shape}")
    if mode is Fusion.SUB:
        return f_est - f_ref
    f_ref = np.broadcast_to(f_ref, f_est.shape[:-3] + f_ref.shape[-3:])
    return np.concatenate([f_est, f_ref], axis=-2)


def slice_for_cnn(f: np.ndarray) -> list[np.ndarray]:
    """One [N_r, W'] map per entry of the second (tx / channel) axis."""
    return [f[..., :, c, :] for c in range(f.shape[-2])]


def to_cnn_input(f: np.ndarray) -> np.ndarray:
    """Batch of feature tensors [B, N_r, C, W'] as channels-last images [B, N_r, W', C]."""
    return np.ascontiguousarray(np.moveaxis(f, -2, -1))
