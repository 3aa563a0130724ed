"""Named verification suites for the estimator theory.

Each suite returns ``{"suite", "passed", "checks": [...]}`` where every
check lists its statistic and pass threshold. Suites: ``prop1`` (LS bias),
``prop2`` (Tikhonov optimality), ``lemma1`` (noise averaging), ``prop3``
(block aggregation), ``clt`` (data Gram concentration) and ``all``.
"""

from __future__ import annotations

import time

import numpy as np

from .ofdm_link import clt_deviation, complex_gaussian, map_symbols, zf_precoder
from .scene_gen import rng_for
from .sensing_estimator import (Report, SensingObservation, estimate_tikhonov, herm,
                                tikhonov_gradient, tikhonov_objective, verify_noise_averaging,
                                verify_ls_bias)

STREAM_VERIFY = 11


def _cn(shape, rng) -> np.ndarray:
    return complex_gaussian(shape, 1.0, rng)


def _qpsk(shape, rng) -> np.ndarray:
    n = int(np.prod(shape))
    return map_symbols(rng.integers(0, 2, size=2 * n), "qpsk").reshape(shape)


def suite_ls_bias(seed: int = 0, n_tx: int = 4, n_rx: int = 4, streams=(1, 2, 3),
                n_symbols: int = 64, n_trials: int = 10_000, n0: float = 0.1) -> list[Report]:
    out = []
    for k in streams:
        rng = rng_for(seed, STREAM_VERIFY, 1, k)
        h = _cn((n_rx, n_tx), rng)
        p = zf_precoder(_cn((k, n_tx, 1), rng))[..., 0]
        s = _qpsk((k, n_symbols), rng)
        rep = verify_ls_bias(h, p, s, n0, n_trials, rng)
        rep.name = f"prop1[K={k}]"
        out.append(rep)
    return out


def suite_tikhonov_optimality(seed: int = 0, n_instances: int = 100, lambdas=(1e-4, 1e-2, 1.0),
                n_perturb: int = 1000, n_tx: int = 4, n_rx: int = 4, k: int = 2,
                n_symbols: int = 16, probe_tol: float = 1e-6) -> list[Report]:
    out = []
    for lam in lambdas:
        worst_gap, worst_probe = np.inf, 0.0
        for i in range(n_instances):
            rng = rng_for(seed, STREAM_VERIFY, 2, i)
            p = zf_precoder(_cn((k, n_tx, 1), rng))[..., 0]
            s = _qpsk((k, n_symbols), rng)
            y = _cn((n_rx, n_symbols), rng)
            a = p @ s
            obs = SensingObservation(y[..., None], p[..., None], s[..., None], 0.0)
            h = estimate_tikhonov(obs, lam)[..., 0]
            f0 = tikhonov_objective(y, h, a, lam)
            radius = 10.0 ** rng.uniform(-3, -1, n_perturb) * max(np.linalg.norm(h), 1e-12)
            d = _cn((n_perturb, n_rx, n_tx), rng)
            d *= (radius / np.linalg.norm(d, axis=(1, 2)))[:, None, None]
            hp = h + d
            f = (np.linalg.norm(y - hp @ a, axis=(1, 2)) ** 2
                 + lam * np.linalg.norm(hp, axis=(1, 2)) ** 2)
            worst_gap = min(worst_gap, float(np.min(f - f0)))
            grad = tikhonov_gradient(y, h, a, lam)
            probe = np.linalg.norm(grad) / (2.0 * np.linalg.norm(y @ herm(a)))
            worst_probe = max(worst_probe, float(probe))
        out.append(Report(f"prop2[lambda={lam:g}]", worst_gap >= 0 and worst_probe < probe_tol,
                          worst_probe, probe_tol,
                          {"min_objective_increase": worst_gap, "n_instances": n_instances,
                           "n_perturbations": n_perturb, "max_relative_gradient": worst_probe}))
    return out


def suite_noise_averaging(seed: int = 0, n0: float = 1.0, lengths=(128, 512, 1024), k: int = 2,
                 n_trials: int = 2000) -> list[Report]:
    out = []
    for l in lengths:
        rep = verify_noise_averaging(n0, l, k, n_trials, rng_for(seed, STREAM_VERIFY, 3, l),
                                     n_blocks=None)
        rep.name = f"lemma1[L={l}]"
        out.append(rep)
    return out


def suite_block_aggregation(seed: int = 0, n0: float = 1.0, n_symbols: int = 256, n_blocks: int = 4,
                k: int = 2, n_trials: int = 10_000, tol: float = 0.05) -> list[Report]:
    rep = verify_noise_averaging(n0, n_symbols, k, n_trials, rng_for(seed, STREAM_VERIFY, 4),
                                 n_blocks=n_blocks, aggregation_tol=tol)
    d = rep.details["aggregation"]
    return [Report(f"prop3[B={n_blocks},L={n_symbols}]", d["passed"], d["relative_difference"],
                   tol, d)]


def suite_gram_concentration(seed: int = 0, lengths=(112, 280, 1120, 4480), k: int = 2,
              n_draws: int = 100) -> list[Report]:
    medians = [float(np.median(clt_deviation(k, l, n_draws, rng_for(seed, STREAM_VERIFY, 5, l))))
               for l in lengths]
    steps = np.diff(medians)
    return [Report("clt_gram_concentration", bool(np.all(steps < 0)), float(np.max(steps)), 0.0,
                   {"lengths": list(lengths), "median_deviation": medians})]


SUITES = {"prop1": suite_ls_bias, "prop2": suite_tikhonov_optimality, "lemma1": suite_noise_averaging,
          "prop3": suite_block_aggregation, "clt": suite_gram_concentration}


def run_suite(name: str, seed: int = 0, **kwargs) -> dict:
    """Run one suite (or ``all``) and return its JSON-ready report."""
    if name == "all":
        parts = [run_suite(n, seed) for n in SUITES]
        return {"suite": "all", "seed": seed, "passed": all(p["passed"] for p in parts),
                "checks": [c for p in parts for c in p["checks"]],
                "seconds": sum(p["seconds"] for p in parts)}
    if name not in SUITES:
        raise KeyError(f"unknown suite '{name}'; choose from {', '.join(list(SUITES) + ['all'])}")
    t0 = time.perf_counter()
    reports = SUITES[name](seed=seed, **kwargs)
    return {"suite": name, "seed": seed, "passed": all(r.passed for r in reports),
            "checks": [r.to_dict() for r in reports],
            "seconds": time.perf_counter() - t0}
