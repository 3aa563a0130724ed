"""Random single-target scenes with seed-addressable draws."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .geometry_maps import Cuboid, Scene

MAX_ATTEMPTS = 10_000
UE_MARGIN_M = 0.01

# stream tags keep independent consumers of the same (seed, index) apart
STREAM_SCENE = 1
STREAM_BITS = 2
STREAM_NOISE = 3
STREAM_SPLIT = 4
STREAM_ENV = 5
STREAM_INIT = 6
STREAM_SHUFFLE = 7


def rng_for(seed: int, stream: int, *index: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, stream, *index)``.

    Draws depend only on the key, never on how many other streams were used,
    so samples can be generated in any order or in parallel.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), *map(int, index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SceneConfig:
    target_side_m: float = 0.5
    target_center_min: tuple = (-2.0, -2.0)
    target_center_max: tuple = (2.0, 2.0)
    target_height_m: float = 1.0
    ue_min: tuple = (-2.0, -2.0, 1.0)
    ue_max: tuple = (2.0, 2.0, 1.0)
    n_ues: int = 2
    box_extents: tuple = (5.0, 5.0, 3.0)
    tx_center: tuple = (-2.4, 0.1, 2.5)
    rx_center: tuple = (-2.4, -0.1, 2.5)
    seed: int = 0

    def __post_init__(self):
        for name in ("target_center_min", "target_center_max", "ue_min", "ue_max",
                     "box_extents", "tx_center", "rx_center"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.target_side_m <= 0:
            raise ValueError("target_side_m must be positive")
        if self.n_ues < 0:
            raise ValueError("n_ues must be nonnegative")
        half = np.asarray(self.box_extents) / 2.0
        box_lo = np.array([-half[0], -half[1], 0.0])
        box_hi = np.array([half[0], half[1], self.box_extents[2]])
        lo = np.array([*self.target_center_min, self.target_height_m])
        hi = np.array([*self.target_center_max, self.target_height_m])
        for name, (a, b) in {"target region": (lo, hi),
                             "UE region": (np.array(self.ue_min), np.array(self.ue_max))}.items():
            if np.any(a > b):
                raise ValueError(f"{name} has min > max")
            if np.any(a < box_lo) or np.any(b > box_hi):
                raise ValueError(f"{name} leaves the environment box")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def sample_scene(config: SceneConfig, index: int = 0) -> Scene:
    """Draw scene number ``index`` of the stream keyed by ``config.seed``."""
    rng = rng_for(config.seed, STREAM_SCENE, index)
    tlo, thi = np.asarray(config.target_center_min), np.asarray(config.target_center_max)
    ulo, uhi = np.asarray(config.ue_min), np.asarray(config.ue_max)
    for _ in range(MAX_ATTEMPTS):
        xy = rng.uniform(tlo, thi)
        target = Cuboid.cube((xy[0], xy[1], config.target_height_m), config.target_side_m)
        ues = rng.uniform(ulo, uhi, size=(config.n_ues, 3))
        if not any(target.contains(u, margin=UE_MARGIN_M) for u in ues):
            return Scene(
                targets=(target,),
                ues=tuple(tuple(float(c) for c in u) for u in ues),
                tx_center=config.tx_center,
                rx_center=config.rx_center,
                box_extents=config.box_extents,
                plane_z=config.target_height_m,
            )
    raise RuntimeError(
        f"no overlap-free scene after {MAX_ATTEMPTS} attempts; scene config is over-constrained")
