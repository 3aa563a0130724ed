"""Dataset generation and the ``.nisac`` container.

Byte layout (all integers little-endian)::

    offset 0    8 bytes   magic b"NISAC\\x00\\x01\\x00"
    offset 8    u64       manifest length M in bytes
    offset 16   M bytes   UTF-8 JSON lines manifest
    offset 16+M           blob

Manifest line 1 is the header: format version, the full run config, its data
hash, record count, per-field shapes/dtypes, and the blob offset of the
target-free reference channel. Each further line describes one record: its
index, scene summary, and ``{field: [offset, nbytes]}`` into the blob.
Complex tensors are stored as interleaved little-endian float32 (re, im)
pairs, labels as little-endian float32, bits packed MSB-first with
``numpy.packbits``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel_model import static_sensing_channel, synthesize_comm_channel, synthesize_sensing_channel
from .config import RunConfig, from_dict
from .geometry_maps import Cuboid, Scene, make_map
from .ofdm_link import generate_bits
from .scene_gen import STREAM_BITS, STREAM_SPLIT, rng_for, sample_scene

MAGIC = b"NISAC\x00\x01\x00"
FORMAT_VERSION = 1


@dataclass
class Dataset:
    config: RunConfig
    bits: np.ndarray          # [N, n_bits] uint8
    h_comm: np.ndarray        # [N, K, N_t, W] complex
    h_sens: np.ndarray        # [N, N_r, N_t, W] complex
    labels: np.ndarray        # [N, I] float
    h_ref: np.ndarray         # [N_r, N_t, W] complex
    scenes: list = field(default_factory=list)
    indices: np.ndarray = None
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.indices is None:
            self.indices = np.arange(len(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.config, self.bits[idx], self.h_comm[idx], self.h_sens[idx],
                       self.labels[idx], self.h_ref, [self.scenes[i] for i in idx],
                       self.indices[idx])


def scene_from_summary(summary: dict, config: RunConfig) -> Scene:
    return Scene(
        targets=tuple(Cuboid(tuple(t["center"]), tuple(t["half_extents"])) for t in summary["targets"]),
        ues=tuple(tuple(u) for u in summary["ues"]),
        tx_center=config.scene.tx_center, rx_center=config.scene.rx_center,
        box_extents=config.scene.box_extents, plane_z=config.scene.target_height_m)


def reference_channel(config: RunConfig) -> np.ndarray:
    """Target-free sensing CSI (environment plus leakage) used as calibration."""
    return static_sensing_channel(config.channel, config.tx_array(), config.rx_array(),
                                  config.scene.box_extents, config.dataset.env_seed)


def make_record(config: RunConfig, index: int):
    scene = sample_scene(config.scene_config(), index)
    grid = config.grid_config()
    bits = generate_bits(grid.n_bits, rng_for(config.dataset.seed, STREAM_BITS, index))
    tx, rx = config.tx_array(), config.rx_array()
    env = config.dataset.env_seed
    h_sens = synthesize_sensing_channel(scene, config.channel, tx, rx, env)
    h_comm = synthesize_comm_channel(scene, config.channel, tx, scene.ues, env)
    label = make_map(scene, config.map_grid(), config.map.representation).values
    return scene, bits, h_comm, h_sens, label


def generate_dataset(config: RunConfig, n_samples: int | None = None) -> Dataset:
    n = config.dataset.n_samples if n_samples is None else int(n_samples)
    if n < 0:
        raise ValueError("n_samples must be nonnegative")
    grid = config.grid_config()
    k, w = grid.n_streams, grid.n_subcarriers
    nt, nr = config.arrays.n_tx, config.arrays.n_rx
    bits = np.zeros((n, grid.n_bits), dtype=np.uint8)
    h_comm = np.zeros((n, k, nt, w), dtype=np.complex64)
    h_sens = np.zeros((n, nr, nt, w), dtype=np.complex64)
    labels = np.zeros((n, config.map.cells_per_side ** 2), dtype=np.float32)
    scenes = []
    for i in range(n):
        scene, bits[i], h_comm[i], h_sens[i], labels[i] = make_record(config, i)
        scenes.append(scene.summary())
    h_ref = reference_channel(config).astype(np.complex64)
    return Dataset(config, bits, h_comm, h_sens, labels, h_ref, scenes)


def split(dataset: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split; the first part holds ``round(ratio * N)`` records."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    n = len(dataset)
    perm = rng_for(seed, STREAM_SPLIT, 0).permutation(n)
    n_first = int(round(ratio * n))
    return dataset.subset(np.sort(perm[:n_first])), dataset.subset(np.sort(perm[n_first:]))


def train_test(dataset: Dataset) -> tuple[Dataset, Dataset]:
    cfg = dataset.config.dataset
    return split(dataset, 1.0 - cfg.test_ratio, cfg.seed)


# ------------------------------------------------------------------ file I/O


def _c64_bytes(x: np.ndarray) -> bytes:
    return np.ascontiguousarray(x, dtype="<c8").tobytes()


def write_dataset(dataset: Dataset, path) -> None:
    cfg = dataset.config
    blob = bytearray()

    def put(raw: bytes):
        off = len(blob)
        blob.extend(raw)
        return [off, len(raw)]

    n = len(dataset)
    header = {
        "format": "nisac", "version": FORMAT_VERSION,
        "n_records": n, "config": cfg.to_dict(), "config_hash": cfg.data_hash(),
        "fields": {
            "bits": {"dtype": "packbits-u1", "shape": [int(dataset.bits.shape[1])]},
            "h_comm": {"dtype": "<c8", "shape": list(dataset.h_comm.shape[1:])},
            "h_sens": {"dtype": "<c8", "shape": list(dataset.h_sens.shape[1:])},
            "label": {"dtype": "<f4", "shape": list(dataset.labels.shape[1:]),
                      "representation": cfg.map.representation},
        },
        "h_ref": {"dtype": "<c8", "shape": list(dataset.h_ref.shape),
                  "span": put(_c64_bytes(dataset.h_ref))},
    }
    lines = [json.dumps(header, sort_keys=True)]
    for i in range(n):
        rec = {
            "index": int(dataset.indices[i]),
            "scene": dataset.scenes[i],
            "bits": put(np.packbits(dataset.bits[i]).tobytes()),
            "h_comm": put(_c64_bytes(dataset.h_comm[i])),
            "h_sens": put(_c64_bytes(dataset.h_sens[i])),
            "label": put(np.ascontiguousarray(dataset.labels[i], dtype="<f4").tobytes()),
        }
        lines.append(json.dumps(rec, sort_keys=True))
    manifest = ("\n".join(lines) + "\n").encode()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        f.write(bytes(blob))
    tmp.replace(path)


def read_header(path) -> dict:
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise ValueError(f"{path} is not a .nisac dataset")
        (m,) = struct.unpack("<Q", f.read(8))
        first = f.read(m).split(b"\n", 1)[0]
    return json.loads(first)


def read_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not a .nisac dataset")
    (m,) = struct.unpack("<Q", raw[8:16])
    lines = raw[16:16 + m].decode().splitlines()
    blob = memoryview(raw)[16 + m:]
    header = json.loads(lines[0])
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {header.get('version')}")
    cfg = from_dict(header["config"])
    fields = header["fields"]

    def get(span, dtype, shape):
        off, nbytes = span
        return np.frombuffer(blob[off:off + nbytes], dtype=dtype).reshape(shape)

    n = header["n_records"]
    n_bits = fields["bits"]["shape"][0]
    bits = np.zeros((n, n_bits), dtype=np.uint8)
    h_comm = np.zeros((n, *fields["h_comm"]["shape"]), dtype=np.complex64)
    h_sens = np.zeros((n, *fields["h_sens"]["shape"]), dtype=np.complex64)
    labels = np.zeros((n, *fields["label"]["shape"]), dtype=np.float32)
    scenes, indices = [], np.zeros(n, dtype=int)
    for i, line in enumerate(lines[1:1 + n]):
        rec = json.loads(line)
        bits[i] = np.unpackbits(get(rec["bits"], np.uint8, -1))[:n_bits]
        h_comm[i] = get(rec["h_comm"], "<c8", fields["h_comm"]["shape"])
        h_sens[i] = get(rec["h_sens"], "<c8", fields["h_sens"]["shape"])
        labels[i] = get(rec["label"], "<f4", fields["label"]["shape"])
        scenes.append(rec["scene"])
        indices[i] = rec["index"]
    h_ref = get(header["h_ref"]["span"], "<c8", header["h_ref"]["shape"]).copy()
    return Dataset(cfg, bits, h_comm, h_sens, labels, h_ref, scenes, indices, header)
