"""
quantized_frontend.py - 1-bit quantized uplink reception

Y = sgn(h x^T + N), with sgn applied separately to the real and imaginary
parts and sgn(0) = +1. Noise is circularly-symmetric complex Gaussian; its
variance follows from an SNR defined per antenna-symbol over the dataset:
SNR = P_t * E[||h||^2 / M] / sigma^2.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from logic.errors import ConfigurationError, DomainError
from logic.seeding import STREAM_NOISE, derive_rng

logger = logging.getLogger(__name__)

NOISE_MODES = ("noiseless", "fixed", "mixed")
SNR_REFERENCE = "per_antenna_symbol"


def complex_sign(z):
    """sign(Re z) + j*sign(Im z) elementwise, sign(0) = +1"""
    z = np.asarray(z)
    re = np.where(np.real(z) >= 0, 1.0, -1.0)
    im = np.where(np.imag(z) >= 0, 1.0, -1.0)
    out = re + 1j * im
    if out.ndim == 0:
        return complex(out)
    return out


def noiseless_signatures(channel_matrix, pilot_symbols):
    """sgn(h x^T) for every row of `channel_matrix`, shape (users, M, N)"""
    channel_matrix = np.atleast_2d(np.asarray(channel_matrix, dtype=np.complex128))
    pilot_symbols = np.asarray(pilot_symbols, dtype=np.complex128)
    return complex_sign(channel_matrix[:, :, None] * pilot_symbols[None, None, :])


@dataclass(frozen=True)
class NoiseSpec:
    """Receiver noise: none, a fixed SNR, or an SNR drawn uniformly in dB per measurement"""
    mode: str = "noiseless"
    snr_db: float = None
    snr_range: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in NOISE_MODES:
            raise ConfigurationError(f"Unknown noise mode {self.mode!r}, expected one of {NOISE_MODES}")
        if self.mode == "fixed" and self.snr_db is None:
            raise ConfigurationError("Fixed-SNR noise needs snr_db")
        if self.mode == "mixed":
            if self.snr_range is None or len(self.snr_range) != 2:
                raise ConfigurationError("Mixed-SNR noise needs snr_range = (low, high)")
            low, high = (float(v) for v in self.snr_range)
            if low > high:
                raise ConfigurationError(f"Mixed-SNR range needs low <= high, got ({low}, {high})")
            object.__setattr__(self, "snr_range", (low, high))

    @classmethod
    def noiseless(cls, seed=0):
        return cls("noiseless", seed=seed)

    @classmethod
    def fixed(cls, snr_db, seed=0):
        return cls("fixed", snr_db=float(snr_db), seed=seed)

    @classmethod
    def mixed(cls, low, high, seed=0):
        return cls("mixed", snr_range=(low, high), seed=seed)

    @property
    def label(self):
        if self.mode == "noiseless":
            return "noiseless"
        if self.mode == "fixed":
            return f"{self.snr_db:g}dB"
        return f"{self.snr_range[0]:g}-{self.snr_range[1]:g}dB"

    def to_dict(self):
        return {
            "mode": self.mode,
            "snr_db": self.snr_db,
            "snr_range": list(self.snr_range) if self.snr_range is not None else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"mode", "snr_db", "snr_range", "seed"}
        if unknown:
            raise ConfigurationError(f"Unknown noise keys: {sorted(unknown)}")
        snr_range = data.get("snr_range")
        return cls(
            mode=data.get("mode", "noiseless"),
            snr_db=data.get("snr_db"),
            snr_range=tuple(snr_range) if snr_range is not None else None,
            seed=int(data.get("seed") or 0),
        )


@dataclass(frozen=True, eq=False)
class QuantizedMeasurement:
    """M x N matrix whose entries are (+-1) + j(+-1)"""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128)
        if entries.ndim != 2:
            raise DomainError(f"Quantized measurement must be an M x N matrix, got shape {entries.shape}")
        if not (np.all(np.abs(entries.real) == 1.0) and np.all(np.abs(entries.imag) == 1.0)):
            raise DomainError("Quantized measurement entries must have real and imaginary parts in {+1, -1}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def shape(self):
        return self.entries.shape

    def same_entries(self, other):
        return np.array_equal(self.entries, other.entries)


def mean_antenna_energy(channels):
    """E over the set of ||h||^2 / M"""
    matrix = getattr(channels, "matrix", None)
    if matrix is None:
        rows = [getattr(c, "entries", c) for c in channels]
        matrix = np.array(rows, dtype=np.complex128) if rows else np.zeros((0, 0))
    matrix = np.atleast_2d(matrix)
    if matrix.shape[0] == 0 or matrix.size == 0:
        raise DomainError("Cannot compute a noise reference from an empty channel set")
    return float(np.mean(np.sum(np.abs(matrix) ** 2, axis=1) / matrix.shape[1]))


def snr_to_sigma2(snr_db, channels, power=1.0):
    return power * mean_antenna_energy(channels) / 10.0 ** (snr_db / 10.0)


def _draw_snr_db(noise, rng):
    if noise.mode == "fixed":
        return noise.snr_db
    low, high = noise.snr_range
    return float(rng.uniform(low, high))


def cscg_noise(shape, sigma2, rng):
    """Circularly-symmetric complex Gaussian samples with E|w|^2 = sigma2"""
    std = math.sqrt(sigma2 / 2.0)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _noisy_sign(h, pilot, noise, reference_energy, rng):
    clean = np.multiply.outer(h, pilot.symbols)
    if noise.mode == "noiseless":
        return complex_sign(clean)
    snr_db = _draw_snr_db(noise, rng)
    sigma2 = pilot.power * reference_energy / 10.0 ** (snr_db / 10.0)
    return complex_sign(clean + cscg_noise(clean.shape, sigma2, rng))


def simulate_measurement(h, pilot, noise, reference_energy=None, user_index=0):
    """Quantized measurement of one channel

    `reference_energy` is the dataset's mean per-antenna energy; when omitted
    the channel's own ||h||^2 / M is used. The noise stream is keyed by
    (noise.seed, user_index).
    """
    entries = np.asarray(getattr(h, "entries", h), dtype=np.complex128).reshape(-1)
    if entries.size == 0:
        raise DomainError("Cannot simulate a measurement of an empty channel")
    if reference_energy is None:
        reference_energy = float(np.sum(np.abs(entries) ** 2)) / entries.size
    rng = derive_rng(noise.seed, STREAM_NOISE, user_index)
    return QuantizedMeasurement(_noisy_sign(entries, pilot, noise, reference_energy, rng))


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Quantized measurements of a whole ChannelSet under one pilot and noise setting"""
    channels: object
    pilot: object
    noise: NoiseSpec
    signs: np.ndarray
    reference_energy: float

    @property
    def num_users(self):
        return self.signs.shape[0]

    def __len__(self):
        return self.signs.shape[0]

    def __getitem__(self, index):
        return QuantizedMeasurement(self.signs[index])

    @property
    def nominal_sigma2(self):
        if self.noise.mode == "fixed":
            return self.pilot.power * self.reference_energy / 10.0 ** (self.noise.snr_db / 10.0)
        return None

    @cached_property
    def vectors(self):
        """Network inputs, shape (users, 2MN)"""
        return vectorize_measurements(self.signs)


def generate_measurements(channels, pilot, noise):
    """Measure every user of `channels`, one independent noise stream per user index"""
    matrix = channels.matrix
    if matrix.shape[0] == 0:
        raise DomainError("Cannot measure an empty channel set")
    reference = mean_antenna_energy(channels)
    signs = np.empty((matrix.shape[0], matrix.shape[1], pilot.length), dtype=np.complex128)
    if noise.mode == "noiseless":
        signs[:] = noiseless_signatures(matrix, pilot.symbols)
    else:
        for u in range(matrix.shape[0]):
            rng = derive_rng(noise.seed, STREAM_NOISE, u)
            signs[u] = _noisy_sign(matrix[u], pilot, noise, reference, rng)
    signs.setflags(write=False)
    logger.info("Simulated %d measurements (M=%d, N=%d, noise=%s)",
                matrix.shape[0], matrix.shape[1], pilot.length, noise.label)
    return MeasurementSet(channels, pilot, noise, signs, reference)


def vectorize_measurements(signs):
    """Column-major flatten of each M x N matrix, then [Re; Im] -> (users, 2MN)"""
    signs = np.asarray(signs)
    single = signs.ndim == 2
    if single:
        signs = signs[None]
    users, m, n = signs.shape
    flat = np.transpose(signs, (0, 2, 1)).reshape(users, m * n)
    vectors = np.concatenate([flat.real, flat.imag], axis=1)
    return vectors[0] if single else vectors


def vectorize_measurement(y):
    return vectorize_measurements(getattr(y, "entries", y))


def devectorize_measurement(vector, num_antennas, pilot_length):
    """Inverse of vectorize_measurement"""
    vector = np.asarray(vector, dtype=np.float64)
    mn = num_antennas * pilot_length
    if vector.shape != (2 * mn,):
        raise DomainError(f"Expected a vector of length {2 * mn}, got shape {vector.shape}")
    flat = vector[:mn] + 1j * vector[mn:]
    return QuantizedMeasurement(flat.reshape(pilot_length, num_antennas).T)
