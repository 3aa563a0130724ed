"""Sensing channel estimation from (Y^s, P, S).

Per active subcarrier, with A_w = P_w S_w  [N_t x L]:

* least squares      H_w = Y_w pinv(A_w)            (SVD, truncated rank)
* Tikhonov           H_w = Y_w A_w^H (A_w A_w^H + lam I)^-1
* Tikhonov, CLT form H_w = Y_w S_w^H P_w^H / L (P_w P_w^H + lam / L I)^-1

Guard and DC subcarriers carry no signal; their slices are returned as zeros.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._accel import HAVE_NUMBA, njit
from .ofdm_link import SensingObservation, _w_first, _w_last, complex_gaussian

RANK_GAP_WARN = 1e-10


class Method(str, enum.Enum):
    LS = "ls"
    TIKHONOV = "tikhonov"


@dataclass
class EstimatorConfig:
    method: str = "tikhonov"
    lambda_reg: float = 1e-2
    use_clt_simplification: bool = False

    def __post_init__(self):
        self.method = Method(self.method).value
        if self.lambda_reg < 0:
            raise ValueError("lambda_reg must be nonnegative")


def herm(x):
    return np.conj(np.swapaxes(x, -1, -2))


@njit(cache=True)
def _chol_solve_loops(g, b):
    # g [n, m, m] Hermitian positive definite, b [n, m, k]; returns g^-1 b
    n, m, k = b.shape
    out = np.empty_like(b)
    lf = np.zeros((m, m), dtype=g.dtype)
    z = np.empty((m, k), dtype=b.dtype)
    ok = np.ones(n, dtype=np.bool_)
    for i in range(n):
        lf[:, :] = 0.0
        for c in range(m):
            d = g[i, c, c].real
            for q in range(c):
                d -= (lf[c, q] * np.conj(lf[c, q])).real
            if not d > 0.0:
                ok[i] = False
                break
            lf[c, c] = np.sqrt(d)
            for r in range(c + 1, m):
                acc = g[i, r, c]
                for q in range(c):
                    acc -= lf[r, q] * np.conj(lf[c, q])
                lf[r, c] = acc / lf[c, c]
        if not ok[i]:
            continue
        for col in range(k):
            for r in range(m):
                acc = b[i, r, col]
                for q in range(r):
                    acc -= lf[r, q] * z[q, col]
                z[r, col] = acc / lf[r, r]
            for r in range(m - 1, -1, -1):
                acc = z[r, col]
                for q in range(r + 1, m):
                    acc -= np.conj(lf[q, r]) * out[i, q, col]
                out[i, r, col] = acc / lf[r, r].real
    return out, ok


def _chol_solve_numpy(g, b):
    try:
        lf = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        return None, False
    z = np.linalg.solve(lf, b)
    return np.linalg.solve(herm(lf), z), True


def _eigh_solve(g, b):
    vals, vecs = np.linalg.eigh(g)
    if np.any(vals <= 0):
        raise np.linalg.LinAlgError("regularized Gram matrix is not positive definite")
    return vecs @ ((herm(vecs) @ b) / vals[..., :, None])


def hermitian_solve(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve G X = B for a batch of Hermitian positive-definite G.

    Cholesky first; any batch whose factorization breaks down is re-solved
    through an eigendecomposition.
    """
    g = np.asarray(g, dtype=complex)
    b = np.asarray(b, dtype=complex)
    lead = g.shape[:-2]
    m, k = b.shape[-2:]
    gf = np.ascontiguousarray(g.reshape(-1, m, m))
    bf = np.ascontiguousarray(np.broadcast_to(b, lead + (m, k)).reshape(-1, m, k))
    if HAVE_NUMBA:
        out, ok = _chol_solve_loops(gf, bf)
        if not ok.all():
            bad = ~ok
            out[bad] = _eigh_solve(gf[bad], bf[bad])
    else:
        out, good = _chol_solve_numpy(gf, bf)
        if not good:
            out = _eigh_solve(gf, bf)
    return out.reshape(lead + (m, k))


def _masked(obs: SensingObservation):
    """W-first views restricted to active subcarriers."""
    act = np.asarray(obs.active, dtype=bool)
    y = _w_first(obs.y)[..., act, :, :]
    p = _w_first(obs.p)[..., act, :, :]
    s = _w_first(obs.s)[..., act, :, :]
    return act, y, p, s


def _scatter(obs: SensingObservation, act, h_active) -> np.ndarray:
    nr = obs.y.shape[-3]
    nt = obs.p.shape[-3]
    lead = np.broadcast_shapes(obs.y.shape[:-3], obs.p.shape[:-3], obs.s.shape[:-3])
    out = np.zeros(lead + (len(act), nr, nt), dtype=complex)
    out[..., act, :, :] = h_active
    return _w_last(out)


def ls_pinv(a: np.ndarray, return_info: bool = False):
    """Truncated-SVD pseudo-inverse of a batch of [m, n] matrices."""
    u, sv, vh = np.linalg.svd(a, full_matrices=False)
    m, n = a.shape[-2:]
    tol = max(m, n) * np.finfo(float).eps * sv[..., :1]
    keep = sv > tol
    inv = np.where(keep, 1.0 / np.where(keep, sv, 1.0), 0.0)
    pinv = herm(vh) @ (inv[..., :, None] * herm(u))
    if not return_info:
        return pinv
    rank = keep.sum(axis=-1)
    # ambiguous when the last kept and first dropped singular values are too close
    padded = np.concatenate([sv, np.zeros(sv.shape[:-1] + (1,))], axis=-1)
    r = np.clip(rank, 1, sv.shape[-1])
    last_kept = np.take_along_axis(padded, (r - 1)[..., None], -1)[..., 0]
    first_dropped = np.take_along_axis(padded, r[..., None], -1)[..., 0]
    gap = (last_kept - first_dropped) / np.maximum(sv[..., 0], np.finfo(float).tiny)
    return pinv, {"rank": rank, "ambiguous": (gap < RANK_GAP_WARN) & (rank < min(m, n))}


def estimate_ls(obs: SensingObservation, return_info: bool = False):
    """Minimum-norm least-squares estimate [..., N_r, N_t, W]."""
    if obs.y.shape[-2] < 1:
        raise ValueError("need at least one OFDM symbol")
    act, y, p, s = _masked(obs)
    a = p @ s
    pinv, info = ls_pinv(a, return_info=True)
    h = _scatter(obs, act, y @ pinv)
    if not return_info:
        return h
    warnings = []
    if np.any(info["ambiguous"]):
        warnings.append(f"numerical rank ambiguous on {int(info['ambiguous'].sum())} subcarrier(s)")
    return h, {"rank": info["rank"], "warnings": warnings}


def estimate_tikhonov(obs: SensingObservation, lambda_reg: float, clt: bool = False) -> np.ndarray:
    """Tikhonov-regularized estimate [..., N_r, N_t, W]."""
    if lambda_reg < 0:
        raise ValueError("lambda_reg must be nonnegative")
    act, y, p, s = _masked(obs)
    nt = p.shape[-2]
    eye = np.eye(nt)
    if clt:
        l = s.shape[-1]
        g = p @ herm(p) + (lambda_reg / l) * eye
        rhs = y @ herm(s) @ herm(p) / l
    else:
        a = p @ s
        g = a @ herm(a) + lambda_reg * eye
        rhs = y @ herm(a)
    if lambda_reg == 0:
        ev = np.linalg.eigvalsh(g)
        if np.any(ev[..., 0] <= nt * np.finfo(float).eps * ev[..., -1]):
            raise np.linalg.LinAlgError(
                "Gram matrix is singular at lambda_reg = 0; use the LS estimator instead")
    # H G = R  <=>  G H^H = R^H  (G Hermitian)
    rhs_h = herm(rhs)
    lead = np.broadcast_shapes(g.shape[:-2], rhs_h.shape[:-2])
    g = np.broadcast_to(g, lead + g.shape[-2:])
    h = herm(hermitian_solve(g, np.broadcast_to(rhs_h, lead + rhs_h.shape[-2:])))
    return _scatter(obs, act, h)


def estimate(obs: SensingObservation, config: EstimatorConfig) -> np.ndarray:
    if Method(config.method) is Method.LS:
        return estimate_ls(obs)
    return estimate_tikhonov(obs, config.lambda_reg, clt=config.use_clt_simplification)


def normalize_csi(h: np.ndarray, return_scale: bool = False):
    """Divide each tensor (last three axes) by its largest entry modulus.

    All-zero tensors come back unchanged with scale 0.
    """
    h = np.asarray(h)
    m = np.max(np.abs(h), axis=(-3, -2, -1), keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    out = h / safe
    if return_scale:
        return out, m[..., 0, 0, 0]
    return out


def tikhonov_objective(y, h, a, lambda_reg) -> float:
    return float(np.linalg.norm(y - h @ a) ** 2 + lambda_reg * np.linalg.norm(h) ** 2)


def tikhonov_gradient(y, h, a, lambda_reg) -> np.ndarray:
    """Wirtinger gradient of the objective with respect to conj(H)."""
    return -2.0 * (y - h @ a) @ herm(a) + 2.0 * lambda_reg * h


# --------------------------------------------------------------------- checks


@dataclass
class Report:
    name: str
    passed: bool
    statistic: float
    threshold: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "statistic": float(self.statistic),
                "threshold": float(self.threshold), "details": self.details}


def projector_from_svd(a: np.ndarray) -> np.ndarray:
    """sum_{k <= rank} u_k u_k^H from the left singular vectors of ``a``."""
    u, sv, _ = np.linalg.svd(a)
    tol = max(a.shape) * np.finfo(float).eps * sv[0]
    r = int(np.sum(sv > tol))
    ur = u[:, :r]
    return ur @ herm(ur)


def verify_ls_bias(h_true, p, s, n0: float, n_trials: int, rng, z_max: float = 5.0) -> Report:
    """Monte Carlo mean of the LS estimate against H sum_k u_k u_k^H.

    ``p`` is [N_t, K] and ``s`` is [K, L] for a single subcarrier.
    """
    h_true, p, s = np.asarray(h_true), np.asarray(p), np.asarray(s)
    a = p @ s
    predicted = h_true @ projector_from_svd(a)
    pinv = ls_pinv(a)
    clean = h_true @ a
    nr, l = clean.shape
    if n0 == 0:
        est = clean @ pinv
        err = float(np.max(np.abs(est - predicted)))
        return Report("ls_bias", err < 1e-10, err, 1e-10,
                      {"mode": "noiseless", "max_abs_error": err})
    total = np.zeros_like(predicted)
    total_sq_re = np.zeros(predicted.shape)
    total_sq_im = np.zeros(predicted.shape)
    chunk = 2000
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        noise = complex_gaussian((n, nr, l), n0, rng)
        est = (clean + noise) @ pinv
        total += est.sum(axis=0)
        total_sq_re += (est.real ** 2).sum(axis=0)
        total_sq_im += (est.imag ** 2).sum(axis=0)
        done += n
    mean = total / n_trials
    var_re = (total_sq_re / n_trials - mean.real ** 2) * n_trials / (n_trials - 1)
    var_im = (total_sq_im / n_trials - mean.imag ** 2) * n_trials / (n_trials - 1)
    se_re = np.sqrt(np.maximum(var_re, 0) / n_trials)
    se_im = np.sqrt(np.maximum(var_im, 0) / n_trials)
    z_re = (mean.real - predicted.real) / np.where(se_re > 0, se_re, np.inf)
    z_im = (mean.imag - predicted.imag) / np.where(se_im > 0, se_im, np.inf)
    z = float(max(np.max(np.abs(z_re)), np.max(np.abs(z_im))))
    # the unbiased alternative H itself must be distinguishable whenever rank < N_t
    z_vs_h = float(np.max(np.abs(mean.real - h_true.real) / np.where(se_re > 0, se_re, np.inf)))
    return Report("ls_bias", z < z_max, z, z_max, {
        "n_trials": n_trials, "rank": int(np.linalg.matrix_rank(a)),
        "n_tx": int(a.shape[0]), "max_abs_z": z, "max_abs_z_vs_unbiased": z_vs_h,
    })


def _noise_projection_variance(n0, n_rx, l_eff, s_rows, n_trials, rng, scale):
    """Per-entry variance of (N S^H) * scale over fresh noise and data draws."""
    acc = 0.0
    count = 0
    chunk = max(1, 200_000 // max(1, n_rx * l_eff))
    done = 0
    while done < n_trials:
        n = min(chunk, n_trials - done)
        s = s_rows(n)  # [n, K, l_eff]
        noise = complex_gaussian((n, n_rx, l_eff), n0, rng)
        x = noise @ herm(s) * scale
        acc += float(np.sum(np.abs(x) ** 2))
        count += x.size
        done += n
    return acc / count


def verify_noise_averaging(n0: float, n_symbols: int, n_streams: int, n_trials: int, rng,
                           n_blocks: int | None = 4, n_rx: int = 4, constellation: str = "qpsk",
                           tol: float = 0.1, aggregation_tol: float = 0.05) -> Report:
    """Variance of N S^H / L against N0 / L, plus the block-aggregation equivalence.

    ``n_blocks=None`` skips the block comparison.
    """
    from .ofdm_link import Constellation, map_symbols

    bps = Constellation(constellation).bits_per_symbol
    k = n_streams

    def draw(length):
        def rows(n):
            bits = rng.integers(0, 2, size=n * k * length * bps)
            return map_symbols(bits, constellation).reshape(n, k, length)
        return rows

    target = n0 / n_symbols
    if n0 == 0:
        s = draw(n_symbols)(1)
        x = np.zeros((n_rx, n_symbols), dtype=complex) @ herm(s[0]) / n_symbols
        zero = bool(np.all(x == 0))
        return Report("noise_averaging", zero, 0.0, 0.0, {"mode": "noiseless", "all_zero": zero})
    var = _noise_projection_variance(n0, n_rx, n_symbols, draw(n_symbols), n_trials, rng,
                                     1.0 / n_symbols)
    ratio = var / target
    avg_ok = abs(ratio - 1.0) <= tol
    details = {"n0": n0, "n_symbols": n_symbols, "n_streams": k,
               "empirical_variance": var, "predicted_variance": target, "ratio": ratio,
               "clt_regime": n_symbols >= 50 * k}
    if n_blocks is None:
        return Report("noise_averaging", bool(avg_ok), abs(ratio - 1.0), tol, details)
    # block aggregation: B L symbols at N0 versus L symbols at N0 / B
    var_blocks = _noise_projection_variance(n0, n_rx, n_blocks * n_symbols,
                                            draw(n_blocks * n_symbols), n_trials, rng,
                                            1.0 / (n_blocks * n_symbols))
    var_single = _noise_projection_variance(n0 / n_blocks, n_rx, n_symbols, draw(n_symbols),
                                            n_trials, rng, 1.0 / n_symbols)
    agg_rel = abs(var_blocks - var_single) / var_single
    agg_ok = agg_rel <= aggregation_tol
    return Report("noise_averaging", bool(avg_ok and agg_ok), abs(ratio - 1.0), tol, {
        **details,
        "aggregation": {"n_blocks": n_blocks, "variance_blocks": var_blocks,
                        "variance_single_reduced_noise": var_single,
                        "predicted": n0 / (n_blocks * n_symbols),
                        "relative_difference": agg_rel, "threshold": aggregation_tol,
                        "passed": bool(agg_ok)},
    })
