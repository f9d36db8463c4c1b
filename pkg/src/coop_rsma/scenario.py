"""Scenario geometry, LoS channels and blockage for a multi-block downlink.

Units are SI throughout.  Channel gains are divided by the thermal noise
amplitude ``sqrt(k_B T0 B)`` so receiver noise has unit variance while
precoder powers stay in watts.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23
NOISE_TEMPERATURE = 290.0

BLOCKAGE_MODES = ("independent", "distance_dependent")


def _square_factor(n: int) -> tuple[int, int]:
    nv = int(np.floor(np.sqrt(n)))
    while n % nv:
        nv -= 1
    return nv, n // nv


@dataclass(frozen=True)
class SystemConfig:
    """All scalars that define one scenario.  Defaults follow the reference setup."""

    n_antennas: int = 16
    n_mues: int = 4
    n_blocks: int = 20
    blockage_p: float = 0.3
    carrier_freq: float = 0.3e12
    block_duration: float = 0.4e-3
    bandwidth: float = 1e9
    pathloss_exp: float = 2.0
    ap_position: tuple = (0.0, 4.0, 1.0)
    due_position: tuple = (8.0, 4.0, 0.0)
    mue_box: tuple = ((2.0, 0.0, 0.0), (6.0, 8.0, 0.0))
    throughput_mue: float = 10.0
    throughput_due: float = 2.0
    eco_s: float = 0.7
    edt_buffer: int = 0
    blockage_mode: str = "independent"
    seed: int = 0
    n_vertical: int | None = None
    n_horizontal: int | None = None
    # algorithm knobs
    sca_epsilon: float = 1e-3
    sca_max_iter: int = 50
    calibration_trials: int = 20
    delta_source: str = "genie"
    delta_value: float | None = None
    solver_accuracy: float = 1e-7
    clear_last_block: bool = True

    def __post_init__(self):
        nv, nh = self.n_vertical, self.n_horizontal
        if nv is None and nh is None:
            nv, nh = _square_factor(self.n_antennas)
        elif nv is None:
            nv = self.n_antennas // nh
        elif nh is None:
            nh = self.n_antennas // nv
        object.__setattr__(self, "n_vertical", int(nv))
        object.__setattr__(self, "n_horizontal", int(nh))
        object.__setattr__(self, "ap_position", tuple(float(v) for v in self.ap_position))
        object.__setattr__(self, "due_position", tuple(float(v) for v in self.due_position))
        object.__setattr__(self, "mue_box", tuple(tuple(float(v) for v in c) for c in self.mue_box))
        self.validate()

    def validate(self) -> None:
        if self.n_antennas < 1 or self.n_vertical * self.n_horizontal != self.n_antennas:
            raise ValueError(
                f"n_antennas={self.n_antennas} is not {self.n_vertical} x {self.n_horizontal}"
            )
        if self.n_mues < 1:
            raise ValueError("n_mues must be positive")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be positive")
        if not 0.0 <= self.blockage_p <= 1.0:
            raise ValueError("blockage_p must lie in [0, 1]")
        if self.throughput_mue < 0 or self.throughput_due < 0:
            raise ValueError("throughput targets must be nonnegative")
        lo, hi = np.asarray(self.mue_box[0]), np.asarray(self.mue_box[1])
        if np.any(lo > hi):
            raise ValueError("mue_box corners must be ordered componentwise")
        if self.blockage_mode not in BLOCKAGE_MODES:
            raise ValueError(f"blockage_mode must be one of {BLOCKAGE_MODES}")
        if self.edt_buffer < 0:
            raise ValueError("edt_buffer must be nonnegative")
        if self.delta_source not in ("genie", "fixed"):
            raise ValueError("delta_source must be 'genie' or 'fixed'")

    def replace(self, **changes) -> "SystemConfig":
        if "n_antennas" in changes and "n_vertical" not in changes and "n_horizontal" not in changes:
            changes.setdefault("n_vertical", None)
            changes.setdefault("n_horizontal", None)
        return dataclasses.replace(self, **changes)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def noise_power(self) -> float:
        return BOLTZMANN * NOISE_TEMPERATURE * self.bandwidth

    @property
    def friis_gain(self) -> float:
        """Free-space gain at 1 m, before noise normalization."""
        return (self.wavelength / (4.0 * np.pi)) ** 2

    @property
    def unit_gain(self) -> float:
        """Noise-normalized unit-distance gain (the chi_0 used in the channels)."""
        return self.friis_gain / self.noise_power

    @property
    def d_max(self) -> float:
        pts = np.array([self.ap_position, self.due_position, *self.mue_box])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path, **overrides) -> SystemConfig:
    """Read a YAML or JSON scenario file whose keys mirror :class:`SystemConfig`."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        import yaml

        data = yaml.safe_load(text) or {}
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SystemConfig(**data)


def array_response(phi: float, psi: float, n_v: int, n_h: int) -> np.ndarray:
    """UPA steering vector, vertical ramp (x) horizontal ramp."""
    if n_v < 1 or n_h < 1:
        raise ValueError("array dimensions must be positive")
    av = np.exp(1j * np.pi * np.arange(n_v) * np.sin(phi))
    ah = np.exp(1j * np.pi * np.arange(n_h) * np.cos(phi) * np.cos(psi))
    return np.kron(av, ah)


@dataclass(frozen=True)
class Geometry:
    ap: np.ndarray
    due: np.ndarray
    mues: np.ndarray  # (T, K, 3)

    @property
    def ap_distance(self) -> np.ndarray:
        return np.linalg.norm(self.mues - self.ap, axis=-1)

    @property
    def due_distance(self) -> np.ndarray:
        return np.linalg.norm(self.mues - self.due, axis=-1)

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Elevation ``phi`` and horizontal angle ``psi`` seen from the AP.

        The planar array spans the y-z plane: ``psi`` is measured from the
        array's horizontal (y) axis within the horizontal plane.
        """
        d = self.mues - self.ap
        rho = np.hypot(d[..., 0], d[..., 1])
        phi = np.arctan2(d[..., 2], rho)
        psi = np.arctan2(d[..., 0], d[..., 1])
        return phi, psi


def sample_geometry(config: SystemConfig, rng: np.random.Generator) -> Geometry:
    lo = np.asarray(config.mue_box[0])
    hi = np.asarray(config.mue_box[1])
    u = rng.random((config.n_blocks, config.n_mues, 3))
    mues = lo + u * (hi - lo)
    return Geometry(np.asarray(config.ap_position), np.asarray(config.due_position), mues)


@dataclass(frozen=True)
class ChannelRealization:
    """LoS channels for all blocks.  Blocked entries of ``h``/``g`` are exactly zero."""

    h_los: np.ndarray  # (T, K, N) complex, unblocked values
    g_los: np.ndarray  # (T, K) complex
    ap_mask: np.ndarray  # (T, K) bool, True = link present
    due_mask: np.ndarray  # (T, K) bool
    noise_scale: float = 1.0
    geometry: Geometry | None = field(default=None, repr=False)

    @property
    def h(self) -> np.ndarray:
        return self.h_los * self.ap_mask[..., None]

    @property
    def g(self) -> np.ndarray:
        return self.g_los * self.due_mask

    @property
    def n_blocks(self) -> int:
        return self.h_los.shape[0]

    @property
    def n_mues(self) -> int:
        return self.h_los.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.h_los.shape[2]

    @property
    def k_active(self) -> np.ndarray:
        """Per-block count of unblocked AP-mUE links (K_t)."""
        return self.ap_mask.sum(axis=1)

    @property
    def k_relay(self) -> np.ndarray:
        """Per-block count of complete AP-mUE-dUE paths (K'_t)."""
        return (self.ap_mask & self.due_mask).sum(axis=1)

    def block(self, t: int) -> "BlockChannel":
        return BlockChannel(self.h[t], self.g[t], self.ap_mask[t].copy(), self.due_mask[t].copy())

    def with_clear_block(self, t: int) -> "ChannelRealization":
        """Copy with every link of block ``t`` unblocked."""
        ap, due = self.ap_mask.copy(), self.due_mask.copy()
        ap[t] = True
        due[t] = True
        return dataclasses.replace(self, ap_mask=ap, due_mask=due)


@dataclass(frozen=True)
class BlockChannel:
    h: np.ndarray  # (K, N)
    g: np.ndarray  # (K,)
    ap_mask: np.ndarray
    due_mask: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.ap_mask)

    @property
    def relays(self) -> np.ndarray:
        return np.flatnonzero(self.ap_mask & self.due_mask)


def blockage_probability(config: SystemConfig, distance: np.ndarray) -> np.ndarray:
    if config.blockage_mode == "independent":
        return np.full(np.shape(distance), config.blockage_p)
    return np.clip(0.5 * np.asarray(distance) / config.d_max, 0.0, 1.0)


def sample_channels(config: SystemConfig, geometry: Geometry, rng: np.random.Generator) -> ChannelRealization:
    chi0 = config.unit_gain
    eta = config.pathloss_exp
    d_ap = geometry.ap_distance
    d_due = geometry.due_distance
    phi, psi = geometry.angles()
    T, K = d_ap.shape
    h = np.empty((T, K, config.n_antennas), dtype=complex)
    for t in range(T):
        for k in range(K):
            a = array_response(phi[t, k], psi[t, k], config.n_vertical, config.n_horizontal)
            h[t, k] = np.sqrt(chi0 * d_ap[t, k] ** (-eta)) * a
    theta = np.mod(2.0 * np.pi * d_due / config.wavelength, 2.0 * np.pi)
    g = np.sqrt(chi0 * d_due ** (-eta)) * np.exp(1j * theta)
    p_ap = blockage_probability(config, d_ap)
    p_due = blockage_probability(config, d_due)
    ap_mask = rng.random((T, K)) >= p_ap
    due_mask = rng.random((T, K)) >= p_due
    return ChannelRealization(h, g, ap_mask, due_mask, float(np.sqrt(config.noise_power)), geometry)


def make_realization(config: SystemConfig, seed: int | None = None) -> ChannelRealization:
    """Geometry and channels from one seed, with independent child streams."""
    ss = np.random.SeedSequence(config.seed if seed is None else seed)
    geo_ss, blk_ss = ss.spawn(2)
    geometry = sample_geometry(config, np.random.default_rng(geo_ss))
    return sample_channels(config, geometry, np.random.default_rng(blk_ss))
