"""Per-batch sensing chain: bits -> RG -> ZF -> echo + noise -> estimate -> features.

This is the part of the training loop that is re-run on every step: only
the stored bits and channels are fixed, the noise is drawn fresh from a
stream keyed by (seed, phase, epoch, record index).
"""

from __future__ import annotations

import numpy as np

from .channel_model import effective_noise_variance
from .config import RunConfig
from .features import Fusion, extract, fuse, precoding_imposed_reference, to_cnn_input
from .ofdm_link import complex_gaussian, map_to_rg, transmit_and_receive, zf_precoder
from .scene_gen import STREAM_NOISE, rng_for
from .sensing_estimator import Method, estimate, normalize_csi

PHASE_TRAIN, PHASE_VAL, PHASE_TEST, PHASE_SCALE = 0, 1, 2, 3


class SensingPipeline:
    def __init__(self, config: RunConfig, h_ref: np.ndarray):
        self.config = config
        self.grid = config.grid_config()
        self.active = self.grid.active_subcarriers()
        self.h_ref = np.asarray(h_ref, dtype=complex)
        self.n0 = effective_noise_variance(config.channel, self.grid.n_streams,
                                           int(self.active.sum()))

    @property
    def ref_lambda(self) -> float:
        est = self.config.estimator
        return 0.0 if Method(est.method) is Method.LS else est.lambda_reg

    def noise(self, shape, seed: int, phase: int, epoch: int, indices) -> np.ndarray:
        out = np.empty((len(indices),) + tuple(shape), dtype=complex)
        for i, idx in enumerate(indices):
            out[i] = complex_gaussian(shape, self.n0, rng_for(seed, STREAM_NOISE, phase, epoch, idx))
        return out

    def features(self, bits, h_comm, h_sens, noise=None) -> np.ndarray:
        """Fused feature tensors [B, N_r, C, W'] for a batch of records."""
        cfg = self.config
        rg = map_to_rg(bits, self.grid)
        p = zf_precoder(np.asarray(h_comm, dtype=complex))
        obs = transmit_and_receive(np.asarray(h_sens, dtype=complex), p, rg.data, self.n0,
                                   noise=noise, active=self.active)
        h_hat = estimate(obs, cfg.estimator)
        if cfg.features.normalize:
            h_hat = normalize_csi(h_hat)
        f_est = extract(h_hat, cfg.features.kind)
        if Fusion(cfg.features.fusion) is Fusion.NOR:
            return f_est
        h_ref = precoding_imposed_reference(self.h_ref, p, rg.data, self.ref_lambda, self.active)
        if cfg.features.normalize:
            h_ref = normalize_csi(h_ref)
        return fuse(f_est, extract(h_ref, cfg.features.kind), cfg.features.fusion)

    def cnn_batch(self, dataset, idx, seed: int, phase: int, epoch: int) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        nr = dataset.h_sens.shape[1]
        shape = (nr, self.grid.n_symbols, self.grid.n_subcarriers)
        noise = self.noise(shape, seed, phase, epoch, dataset.indices[idx]) if self.n0 > 0 else None
        f = self.features(dataset.bits[idx], dataset.h_comm[idx], dataset.h_sens[idx], noise)
        return to_cnn_input(f)

    def input_shape(self) -> tuple[int, int, int]:
        """(height, width, channels) of the CNN input."""
        nr, nt = self.config.arrays.n_rx, self.config.arrays.n_tx
        w = self.grid.n_subcarriers
        if self.config.features.kind == "direct":
            w *= 2
        c = 2 * nt if Fusion(self.config.features.fusion) is Fusion.STA else nt
        return nr, w, c
