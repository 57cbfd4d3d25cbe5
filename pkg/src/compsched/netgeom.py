"""Cellular geometry, user placement, pathloss/shadowing and noise variances.

Everything here is a pure function of (config, rng stream); layouts, drops and
gain tables are immutable once built, so independent drops can be generated in
parallel from disjoint seed streams.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# Triangular-lattice basis for the hexagonal grid (unit spacing).
_LATTICE_A1 = np.array([1.0, 0.0])
_LATTICE_A2 = np.array([0.5, np.sqrt(3.0) / 2.0])

# Cluster cells in lattice coordinates (i, j); first M entries are used.
_CLUSTER_CELLS = [(0, 0), (1, 0), (0, 1)]

MIN_BS_USER_DISTANCE_M = 35.0

PATHLOSS_PRESETS = {
    # preset name -> intercept in dB at 1 m (slope is 37.6 dB/decade for both)
    "two-cell": 35.3,
    "campaign": 36.3,
}
_PATHLOSS_SLOPE_DB = 37.6


@dataclass(frozen=True)
class LayoutConfig:
    kind: str = "campaign"          # "campaign" (hex grid) | "two-cell" (linear)
    cluster_size: int = 3           # M, number of coordinated BSs
    interferer_ring: int = 9        # 0 to disable; else the natural ring size
    bs_spacing_m: float = 500.0     # BS-to-BS distance
    antennas_per_bs: int = 4        # N_t
    users_per_cell: int = 20        # K
    max_power_w: float = 40.0       # P_m
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 9.0
    pathloss_preset: str = "campaign"


@dataclass(frozen=True)
class NetworkLayout:
    coordinated_bs: np.ndarray      # (M, 2) positions in meters
    interferer_bs: np.ndarray       # (I, 2) positions in meters
    bs_to_bs_distance: float
    antennas_per_bs: int
    users_per_cell: int
    max_power_w: float
    bandwidth_hz: float
    noise_figure_db: float
    pathloss_preset: str
    kind: str = "campaign"

    @property
    def num_cells(self) -> int:
        return self.coordinated_bs.shape[0]

    @property
    def num_users(self) -> int:
        return self.num_cells * self.users_per_cell


@dataclass(frozen=True)
class UserDrop:
    positions: np.ndarray           # (M*K, 2), user i_{km} = K*(m-1)+k
    home_cell: np.ndarray           # (M*K,) int, index of the geometric cell


@dataclass(frozen=True)
class LargeScaleGains:
    alpha: np.ndarray               # (M*K, M) linear power gains to coordinated BSs
    sigma2: np.ndarray              # (M*K,) noise-plus-out-of-cluster-interference, W
    pathloss_model: str


def thermal_noise_w(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts: -174 dBm/Hz + 10log10(BW) + NF."""
    dbm = -174.0 + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
    return float(10.0 ** (dbm / 10.0) / 1e3)


def pathloss_db(distance_m, preset: str = "campaign"):
    """Distance-dependent mean power loss in dB (negative gain).

    "two-cell": -35.3 - 37.6*log10(d); "campaign": -36.3 - 37.6*log10(d).
    Distances below the 1 m reference are rejected.
    """
    if preset not in PATHLOSS_PRESETS:
        raise ValueError(f"unknown pathloss preset {preset!r}")
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 1.0):
        raise ValueError("pathloss model is only valid for distances >= 1 m")
    return -(PATHLOSS_PRESETS[preset] + _PATHLOSS_SLOPE_DB * np.log10(d))


def _ring_cells(cluster: list[tuple[int, int]]) -> list[tuple[int, int]]:
    # All lattice cells adjacent to the cluster but not in it.
    neighbor_steps = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)]
    members = set(cluster)
    ring = set()
    for (i, j) in cluster:
        for (di, dj) in neighbor_steps:
            cand = (i + di, j + dj)
            if cand not in members:
                ring.add(cand)
    return sorted(ring)


def _lattice_to_xy(cells: list[tuple[int, int]], spacing: float) -> np.ndarray:
    if not cells:
        return np.zeros((0, 2))
    ij = np.array(cells, dtype=float)
    return spacing * (ij[:, :1] * _LATTICE_A1 + ij[:, 1:] * _LATTICE_A2)


def build_layout(config: LayoutConfig) -> NetworkLayout:
    """Construct the BS geometry for a config.

    "campaign": cluster of M in {1,2,3} mutually adjacent hex cells plus the
    full ring of interfering cells around it (9 for M=3).  "two-cell": the
    linear layout with two BSs at -spacing/2 and +spacing/2 and no interferers.
    """
    if config.bs_spacing_m <= 0:
        raise ValueError("BS spacing must be positive")
    s = config.bs_spacing_m

    if config.kind == "two-cell":
        if config.cluster_size != 2:
            raise ValueError("two-cell layout requires cluster_size == 2")
        coord = np.array([[-s / 2.0, 0.0], [s / 2.0, 0.0]])
        interf = np.zeros((0, 2))
    elif config.kind == "campaign":
        if config.cluster_size not in (1, 2, 3):
            raise ValueError("hex cluster supports 1..3 coordinated cells")
        cluster = _CLUSTER_CELLS[: config.cluster_size]
        coord = _lattice_to_xy(cluster, s)
        if config.interferer_ring == 0:
            interf = np.zeros((0, 2))
        else:
            ring = _ring_cells(cluster)
            if config.interferer_ring != len(ring):
                raise ValueError(
                    f"interferer ring around {config.cluster_size} cells has "
                    f"{len(ring)} members, got {config.interferer_ring}"
                )
            interf = _lattice_to_xy(ring, s)
    else:
        raise ValueError(f"unknown layout kind {config.kind!r}")

    coord.setflags(write=False)
    interf.setflags(write=False)
    return NetworkLayout(
        coordinated_bs=coord,
        interferer_bs=interf,
        bs_to_bs_distance=s,
        antennas_per_bs=config.antennas_per_bs,
        users_per_cell=config.users_per_cell,
        max_power_w=config.max_power_w,
        bandwidth_hz=config.bandwidth_hz,
        noise_figure_db=config.noise_figure_db,
        pathloss_preset=config.pathloss_preset,
        kind=config.kind,
    )


def _sample_hex_point(center: np.ndarray, spacing: float, rng) -> np.ndarray:
    # Regular hexagon (Voronoi cell of the triangular lattice): inradius s/2,
    # flat sides facing the neighbors; sample by rejection from the bounding box.
    circ = spacing / np.sqrt(3.0)
    normals = np.array([[1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0], [-0.5, np.sqrt(3.0) / 2.0]])
    while True:
        p = rng.uniform(-circ, circ, size=2)
        if np.max(np.abs(normals @ p)) <= spacing / 2.0:
            return center + p


def drop_users(layout: NetworkLayout, rng: np.random.Generator,
               max_tries_per_user: int = 100000) -> UserDrop:
    """Place K users uniformly in each cell, >= 35 m away from every BS."""
    all_bs = np.vstack([layout.coordinated_bs, layout.interferer_bs])
    positions = []
    home = []
    for m in range(layout.num_cells):
        center = layout.coordinated_bs[m]
        for _ in range(layout.users_per_cell):
            for attempt in range(max_tries_per_user):
                if layout.kind == "two-cell":
                    x = rng.uniform(center[0] - layout.bs_to_bs_distance / 2.0,
                                    center[0] + layout.bs_to_bs_distance / 2.0)
                    p = np.array([x, 0.0])
                else:
                    p = _sample_hex_point(center, layout.bs_to_bs_distance, rng)
                if np.min(np.linalg.norm(all_bs - p, axis=1)) >= MIN_BS_USER_DISTANCE_M:
                    positions.append(p)
                    home.append(m)
                    break
            else:
                raise RuntimeError("exclusion zone rejection loop did not terminate; "
                                   "layout leaves almost no admissible area")
    pos = np.array(positions)
    pos.setflags(write=False)
    cells = np.array(home, dtype=int)
    cells.setflags(write=False)
    return UserDrop(positions=pos, home_cell=cells)


def drop_from_positions(layout: NetworkLayout, positions) -> UserDrop:
    """Build a drop from explicit positions; home cell = nearest coordinated BS."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.shape[1] == 1:  # allow scalar x coordinates for the linear layout
        pos = np.hstack([pos, np.zeros_like(pos)])
    d = np.linalg.norm(pos[:, None, :] - layout.coordinated_bs[None, :, :], axis=2)
    pos.setflags(write=False)
    cells = np.argmin(d, axis=1).astype(int)
    cells.setflags(write=False)
    return UserDrop(positions=pos, home_cell=cells)


def compute_gains(layout: NetworkLayout, drop: UserDrop, shadowing_sigma_db: float,
                  rng: np.random.Generator) -> LargeScaleGains:
    """Large-scale gains alpha_{i,n} and per-user noise variance sigma^2_i.

    alpha = 10^((pathloss_dB + shadowing_dB)/10) with lognormal shadowing drawn
    independently per (user, BS) link.  sigma^2_i sums full-power interference
    from every out-of-cluster BS plus thermal noise.
    """
    n_users = drop.positions.shape[0]
    noise_w = thermal_noise_w(layout.bandwidth_hz, layout.noise_figure_db)

    def link_gains(bs_positions: np.ndarray) -> np.ndarray:
        if bs_positions.shape[0] == 0:
            return np.zeros((n_users, 0))
        d = np.linalg.norm(drop.positions[:, None, :] - bs_positions[None, :, :], axis=2)
        pl = pathloss_db(np.maximum(d, 1.0), layout.pathloss_preset)
        shadow = shadowing_sigma_db * rng.standard_normal(d.shape)
        return 10.0 ** ((pl + shadow) / 10.0)

    alpha = link_gains(layout.coordinated_bs)
    alpha_interf = link_gains(layout.interferer_bs)
    sigma2 = layout.max_power_w * alpha_interf.sum(axis=1) + noise_w
    alpha.setflags(write=False)
    sigma2.setflags(write=False)
    return LargeScaleGains(alpha=alpha, sigma2=sigma2, pathloss_model=layout.pathloss_preset)


# --- plain-text serialization (campaign reproducibility) ---------------------

def _fmt_points(points: np.ndarray) -> str:
    return ", ".join(f"{float(x)!r} {float(y)!r}" for x, y in points)


def _parse_points(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros((0, 2))
    rows = [tuple(float(t) for t in item.split()) for item in text.split(",")]
    return np.array(rows)


def layout_to_text(layout: NetworkLayout) -> str:
    lines = [
        "# compsched layout v1",
        f"kind = {layout.kind}",
        f"bs_to_bs_distance = {layout.bs_to_bs_distance!r}",
        f"antennas_per_bs = {layout.antennas_per_bs}",
        f"users_per_cell = {layout.users_per_cell}",
        f"max_power_w = {layout.max_power_w!r}",
        f"bandwidth_hz = {layout.bandwidth_hz!r}",
        f"noise_figure_db = {layout.noise_figure_db!r}",
        f"pathloss_preset = {layout.pathloss_preset}",
        f"coordinated_bs = {_fmt_points(layout.coordinated_bs)}",
        f"interferer_bs = {_fmt_points(layout.interferer_bs)}",
    ]
    return "\n".join(lines) + "\n"


def _parse_kv(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def layout_from_text(text: str) -> NetworkLayout:
    kv = _parse_kv(text)
    coord = _parse_points(kv["coordinated_bs"])
    interf = _parse_points(kv["interferer_bs"])
    coord.setflags(write=False)
    interf.setflags(write=False)
    return NetworkLayout(
        coordinated_bs=coord,
        interferer_bs=interf,
        bs_to_bs_distance=float(kv["bs_to_bs_distance"]),
        antennas_per_bs=int(kv["antennas_per_bs"]),
        users_per_cell=int(kv["users_per_cell"]),
        max_power_w=float(kv["max_power_w"]),
        bandwidth_hz=float(kv["bandwidth_hz"]),
        noise_figure_db=float(kv["noise_figure_db"]),
        pathloss_preset=kv["pathloss_preset"],
        kind=kv["kind"],
    )


def drop_to_text(drop: UserDrop) -> str:
    lines = [
        "# compsched drop v1",
        f"positions = {_fmt_points(drop.positions)}",
        f"home_cell = {', '.join(str(c) for c in drop.home_cell)}",
    ]
    return "\n".join(lines) + "\n"


def drop_from_text(text: str) -> UserDrop:
    kv = _parse_kv(text)
    pos = _parse_points(kv["positions"])
    cells = np.array([int(t) for t in kv["home_cell"].split(",")], dtype=int)
    pos.setflags(write=False)
    cells.setflags(write=False)
    return UserDrop(positions=pos, home_cell=cells)
