import re

import numpy as np
import pytest

from nisac.geometry_maps import Cuboid, Scene, make_grid


def cube_scene(*centers_xy, side=0.5, z=1.0):
    """Scene with one cube per (x, y) center and default transceiver placement."""
    return Scene(
        targets=tuple(Cuboid.cube((x, y, z), side) for x, y in centers_xy),
        ues=(),
        tx_center=(-2.4, 0.1, 2.5),
        rx_center=(-2.4, -0.1, 2.5),
        box_extents=(5.0, 5.0, 3.0),
        plane_z=z,
    )


@pytest.fixture
def room_grid():
    return make_grid((-2.5, -2.5), (2.5, 2.5), 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


CONFIG_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def desk_config(**overrides):
    """Desk config with dotted-path overrides (``train__epochs=2`` style keys)."""
    from nisac.config import load_config, with_overrides

    cfg = load_config(CONFIG_DIR / "desk.toml")
    return with_overrides(cfg, {k.replace("__", "."): v for k, v in overrides.items()})


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE_LINES: list = []


def _criterion_key(line: str):
    num, suffix = re.match(r"\S+ (\d+)(\w*):", line).groups()
    return int(num), suffix


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=_criterion_key):
        terminalreporter.write_line(line)
