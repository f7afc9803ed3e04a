"""
channel_model.py - Geometric multipath channels seen by a uniform linear array

Channels follow h = sum_l alpha_l * a(phi_l) with the array response
[a(phi)]_m = exp(j * 2*pi * d * m * cos(phi)), m = 0..M-1, d in wavelengths.
Angles of arrival live in [0, pi).
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from logic.errors import ConfigurationError, DomainError
from logic.seeding import STREAM_SCENARIO, derive_rng

logger = logging.getLogger(__name__)

GAIN_MODELS = ("unit", "complex-gaussian")
USER_LAYOUTS = ("independent", "grid")

# Largest per-user phase drift of a scatterer gain along the user grid (rad/user)
GRID_MAX_PHASE_RATE = 0.05


def _check_aoa(aoa):
    if not (0.0 <= aoa < math.pi):
        raise DomainError(f"Angle of arrival must lie in [0, pi), got {aoa!r}")


@dataclass(frozen=True)
class ArrayGeometry:
    """ULA with `num_antennas` elements spaced `element_spacing` wavelengths apart"""
    num_antennas: int
    element_spacing: float = 0.5

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise DomainError(f"num_antennas must be a positive integer, got {self.num_antennas!r}")
        if not self.element_spacing > 0:
            raise DomainError(f"element_spacing must be positive, got {self.element_spacing!r}")

    def with_antennas(self, num_antennas):
        return ArrayGeometry(num_antennas, self.element_spacing)


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    aoa: float

    def __post_init__(self):
        _check_aoa(self.aoa)


@dataclass(frozen=True, eq=False)
class ChannelVector:
    """Complex gain per BS antenna, with optional scenario tags"""
    entries: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128).reshape(-1)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return self.entries.shape[0]

    @property
    def num_antennas(self):
        return self.entries.shape[0]

    @property
    def energy(self):
        return float(np.vdot(self.entries, self.entries).real)

    def is_zero(self):
        return not np.any(self.entries)

    def same_entries(self, other):
        return np.array_equal(self.entries, other.entries)


def _steering_matrix(geometry, aoas):
    """Array responses for a batch of angles, shape (len(aoas), M)"""
    aoas = np.asarray(aoas, dtype=np.float64)
    m = np.arange(geometry.num_antennas, dtype=np.float64)
    phase = 2.0 * np.pi * geometry.element_spacing * np.multiply.outer(np.cos(aoas), m)
    return np.exp(1j * phase)


def array_response(geometry, aoa):
    _check_aoa(aoa)
    return ChannelVector(_steering_matrix(geometry, [aoa])[0])


def synthesize_channel(geometry, paths):
    """Exact gain-weighted sum of array responses over `paths`"""
    paths = list(paths)
    if not paths:
        raise DomainError("synthesize_channel needs at least one path")
    for path in paths:
        _check_aoa(path.aoa)
    gains = np.array([p.gain for p in paths], dtype=np.complex128)
    responses = _steering_matrix(geometry, [p.aoa for p in paths])
    return ChannelVector(gains @ responses)


@dataclass(frozen=True)
class AoaGrid:
    """Primary (first-path) angle of every user: evenly spaced or listed explicitly"""
    min_separation: float = None
    aoas: tuple = None

    def __post_init__(self):
        if (self.min_separation is None) == (self.aoas is None):
            raise ConfigurationError("aoa_grid needs exactly one of 'min_separation' or 'aoas'")
        if self.min_separation is not None and not self.min_separation > 0:
            raise ConfigurationError(f"aoa_grid.min_separation must be positive, got {self.min_separation!r}")
        if self.aoas is not None:
            object.__setattr__(self, "aoas", tuple(float(a) for a in self.aoas))
            for a in self.aoas:
                if not (0.0 <= a < math.pi):
                    raise ConfigurationError(f"aoa_grid entry {a!r} outside [0, pi)")

    def primary_aoas(self, num_users):
        if self.aoas is not None:
            if len(self.aoas) < num_users:
                raise ConfigurationError(
                    f"aoa_grid lists {len(self.aoas)} angles for {num_users} users")
            return np.array(self.aoas[:num_users], dtype=np.float64)
        if (num_users - 1) * self.min_separation >= math.pi:
            raise ConfigurationError(
                f"{num_users} users cannot be separated by {self.min_separation} rad inside [0, pi)")
        return np.arange(num_users, dtype=np.float64) * self.min_separation

    def separation(self, num_users):
        """Smallest spacing between the primary angles actually used"""
        if self.min_separation is not None:
            return float(self.min_separation)
        used = np.sort(self.primary_aoas(num_users))
        if used.size < 2:
            return None
        return float(np.min(np.diff(used)))

    def to_dict(self):
        if self.aoas is not None:
            return {"aoas": list(self.aoas)}
        return {"min_separation": self.min_separation}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"min_separation", "aoas"}
        if unknown:
            raise ConfigurationError(f"Unknown aoa_grid keys: {sorted(unknown)}")
        return cls(min_separation=data.get("min_separation"), aoas=data.get("aoas"))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Candidate channels sharing one array geometry

    `path_aoas` / `path_gains` (users x L) are kept when the set was
    synthesized so that the same users can be re-synthesized at another M.
    """
    channels: tuple
    geometry: ArrayGeometry
    seed: int = 0
    num_paths: int = 1
    gain_model: str = "unit"
    aoa_separation: float = None
    path_aoas: np.ndarray = None
    path_gains: np.ndarray = None

    def __post_init__(self):
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if self.num_paths < 1:
            raise DomainError(f"num_paths must be positive, got {self.num_paths}")
        seen = {}
        for idx, channel in enumerate(channels):
            if channel.num_antennas != self.geometry.num_antennas:
                raise DomainError(
                    f"Channel {idx} has {channel.num_antennas} entries, geometry has "
                    f"{self.geometry.num_antennas} antennas")
            if channel.is_zero():
                raise DomainError(f"Channel {idx} is all-zero and cannot be a candidate")
            key = channel.entries.tobytes()
            if key in seen:
                raise DomainError(f"Channels {seen[key]} and {idx} are identical")
            seen[key] = idx

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __getitem__(self, index):
        return self.channels[index]

    @cached_property
    def matrix(self):
        """All channels stacked, shape (num_users, M)"""
        if not self.channels:
            return np.zeros((0, self.geometry.num_antennas), dtype=np.complex128)
        stacked = np.stack([c.entries for c in self.channels])
        stacked.setflags(write=False)
        return stacked

    def subset(self, indices):
        indices = [int(i) for i in indices]
        return ChannelSet(
            channels=tuple(self.channels[i] for i in indices),
            geometry=self.geometry,
            seed=self.seed,
            num_paths=self.num_paths,
            gain_model=self.gain_model,
            aoa_separation=self.aoa_separation,
            path_aoas=None if self.path_aoas is None else self.path_aoas[indices],
            path_gains=None if self.path_gains is None else self.path_gains[indices],
        )

    @classmethod
    def from_matrix(cls, matrix, geometry, **kwargs):
        matrix = np.asarray(matrix, dtype=np.complex128)
        channels = tuple(ChannelVector(row, {"user": i}) for i, row in enumerate(matrix))
        return cls(channels=channels, geometry=geometry, **kwargs)

    def same_entries(self, other):
        return self.geometry == other.geometry and np.array_equal(self.matrix, other.matrix)


def _draw_paths(num_users, num_paths, primary, gain_model, layout, rng):
    """Angles and gains (users x L); draws never depend on the antenna count"""
    aoas = np.empty((num_users, num_paths), dtype=np.float64)
    aoas[:, 0] = primary
    scale = 1.0 / math.sqrt(num_paths)

    if layout == "independent":
        if num_paths > 1:
            aoas[:, 1:] = rng.uniform(0.0, math.pi, size=(num_users, num_paths - 1))
        if gain_model == "unit":
            gains = np.ones((num_users, num_paths), dtype=np.complex128)
        else:
            gains = (rng.standard_normal((num_users, num_paths))
                     + 1j * rng.standard_normal((num_users, num_paths))) * scale / math.sqrt(2.0)
        return aoas, gains

    # grid: scatterers are fixed for the scenario, their gains drift smoothly with the user index
    if num_paths > 1:
        aoas[:, 1:] = rng.uniform(0.0, math.pi, size=num_paths - 1)
    if gain_model == "unit":
        base = np.ones(num_paths, dtype=np.complex128)
    else:
        base = (rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)) * scale / math.sqrt(2.0)
    rates = rng.uniform(-GRID_MAX_PHASE_RATE, GRID_MAX_PHASE_RATE, size=num_paths)
    rates[0] = 0.0
    users = np.arange(num_users, dtype=np.float64)
    gains = base[None, :] * np.exp(1j * np.multiply.outer(users, rates))
    return aoas, gains


def generate_scenario(geometry, num_users, num_paths, aoa_grid, gain_model="unit", seed=0,
                      layout="independent"):
    """Reproducible synthetic user set

    User u's first path arrives from the u-th grid angle. With
    layout="independent" the remaining paths and all gains are drawn per user;
    with layout="grid" the scatterer paths are shared by all users and their
    gains vary smoothly along the user index, so neighbouring users have
    similar channels.
    """
    if gain_model not in GAIN_MODELS:
        raise ConfigurationError(f"Unknown gain_model {gain_model!r}, expected one of {GAIN_MODELS}")
    if layout not in USER_LAYOUTS:
        raise ConfigurationError(f"Unknown layout {layout!r}, expected one of {USER_LAYOUTS}")
    if num_users < 1:
        raise ConfigurationError(f"num_users must be positive, got {num_users}")
    if num_paths < 1:
        raise ConfigurationError(f"num_paths must be positive, got {num_paths}")
    if isinstance(aoa_grid, dict):
        aoa_grid = AoaGrid.from_dict(aoa_grid)

    primary = aoa_grid.primary_aoas(num_users)
    rng = derive_rng(seed, STREAM_SCENARIO)
    aoas, gains = _draw_paths(num_users, num_paths, primary, gain_model, layout, rng)

    responses = _steering_matrix(geometry, aoas.reshape(-1)).reshape(num_users, num_paths, -1)
    matrix = np.einsum("ul,ulm->um", gains, responses)

    keep = np.flatnonzero(np.any(matrix != 0, axis=1))
    if keep.size < num_users:
        logger.warning("Dropped %d all-zero channels from the scenario", num_users - keep.size)

    channels = tuple(
        ChannelVector(matrix[u], {"user": int(u), "grid_position": float(primary[u])}) for u in keep
    )
    channel_set = ChannelSet(
        channels=channels,
        geometry=geometry,
        seed=int(seed),
        num_paths=int(num_paths),
        gain_model=gain_model,
        aoa_separation=aoa_grid.separation(num_users),
        path_aoas=aoas[keep],
        path_gains=gains[keep],
    )
    logger.debug("Generated %d users, M=%d, L=%d, seed=%d",
                 len(channel_set), geometry.num_antennas, num_paths, seed)
    return channel_set


@dataclass(frozen=True)
class ScenarioParams:
    """Declarative scenario; `build(M)` gives the same users seen by an M-element array"""
    num_antennas: int = 64
    num_users: int = 200
    num_paths: int = 1
    aoa_grid: AoaGrid = AoaGrid(min_separation=0.01)
    gain_model: str = "unit"
    layout: str = "independent"
    element_spacing: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.aoa_grid, dict):
            object.__setattr__(self, "aoa_grid", AoaGrid.from_dict(self.aoa_grid))
        if self.gain_model not in GAIN_MODELS:
            raise ConfigurationError(f"Unknown gain_model {self.gain_model!r}, expected one of {GAIN_MODELS}")
        if self.layout not in USER_LAYOUTS:
            raise ConfigurationError(f"Unknown layout {self.layout!r}, expected one of {USER_LAYOUTS}")
        if self.num_users < 1 or self.num_paths < 1 or self.num_antennas < 1:
            raise ConfigurationError("num_users, num_paths and num_antennas must be positive")

    def geometry(self, num_antennas=None):
        return ArrayGeometry(num_antennas or self.num_antennas, self.element_spacing)

    def build(self, num_antennas=None):
        return generate_scenario(self.geometry(num_antennas), self.num_users, self.num_paths,
                                 self.aoa_grid, self.gain_model, self.seed, self.layout)

    def to_dict(self):
        return {
            "num_antennas": self.num_antennas,
            "num_users": self.num_users,
            "num_paths": self.num_paths,
            "aoa_grid": self.aoa_grid.to_dict(),
            "gain_model": self.gain_model,
            "layout": self.layout,
            "element_spacing": self.element_spacing,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        known = {"num_antennas", "num_users", "num_paths", "aoa_grid", "gain_model", "layout",
                 "element_spacing", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown scenario keys: {sorted(unknown)}")
        values = {k: v for k, v in data.items() if v is not None}
        if "aoa_grid" in values:
            values["aoa_grid"] = AoaGrid.from_dict(values["aoa_grid"])
        return cls(**values)
