"""
evaluation.py - Figures of merit for channel estimates

NMSE = ||h - h_hat||^2 / ||h||^2 and, for a conjugate beamformer
f = h_hat^* / ||h_hat||, the per-antenna SNR (rho / M) |h_hat^H h|^2 / ||h_hat||^2,
bounded by rho ||h||^2 / M.
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from logic.errors import DomainError

logger = logging.getLogger(__name__)


def _entries(channel):
    return np.asarray(getattr(channel, "entries", channel), dtype=np.complex128).reshape(-1)


def _pair(true, estimate):
    h, h_hat = _entries(true), _entries(estimate)
    if h.shape != h_hat.shape:
        raise DomainError(f"Channel lengths differ ({h.size} vs {h_hat.size})")
    return h, h_hat


def db_to_linear(value_db):
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value):
    if value <= 0:
        return -math.inf
    return 10.0 * math.log10(value)


def nmse_metric(true, estimate):
    h, h_hat = _pair(true, estimate)
    energy = float(np.vdot(h, h).real)
    if energy == 0.0:
        raise DomainError("NMSE is undefined for an all-zero true channel")
    err = h - h_hat
    return float(np.vdot(err, err).real) / energy


def per_antenna_snr(true, estimate, rho):
    h, h_hat = _pair(true, estimate)
    est_energy = float(np.vdot(h_hat, h_hat).real)
    if est_energy == 0.0:
        raise DomainError("The conjugate beamformer is undefined for an all-zero estimate")
    return (rho / h.size) * abs(np.vdot(h_hat, h)) ** 2 / est_energy


def upper_bound_snr(true, rho):
    h = _entries(true)
    energy = float(np.vdot(h, h).real)
    if energy == 0.0:
        raise DomainError("The SNR bound is undefined for an all-zero channel")
    return rho * energy / h.size


@dataclass
class EstimateMetrics:
    """Dataset-level metrics: mean NMSE, mean-of-linear SNRs expressed in dB"""
    nmse: float
    mean_snr_per_antenna_db: float
    upper_bound_db: float
    num_samples: int
    zero_estimates: int = 0

    def to_dict(self):
        return asdict(self)


def evaluate_estimates(true_matrix, estimate_matrix, rho):
    """Metrics over matching rows of true and estimated channels

    An all-zero estimate leaves the beamformer undefined; such samples count
    as zero SNR and are reported in `zero_estimates`.
    """
    h = np.atleast_2d(np.asarray(true_matrix, dtype=np.complex128))
    h_hat = np.atleast_2d(np.asarray(estimate_matrix, dtype=np.complex128))
    if h.shape != h_hat.shape:
        raise DomainError(f"True channels {h.shape} and estimates {h_hat.shape} differ in shape")
    if h.shape[0] == 0:
        raise DomainError("No samples to evaluate")
    m = h.shape[1]
    energy = np.sum(np.abs(h) ** 2, axis=1)
    if np.any(energy == 0):
        raise DomainError(f"True channel {int(np.flatnonzero(energy == 0)[0])} is all-zero")
    nmse = np.sum(np.abs(h - h_hat) ** 2, axis=1) / energy

    est_energy = np.sum(np.abs(h_hat) ** 2, axis=1)
    inner = np.abs(np.sum(np.conj(h_hat) * h, axis=1)) ** 2
    zero = est_energy == 0
    safe = np.where(zero, 1.0, est_energy)
    snr = np.where(zero, 0.0, (rho / m) * inner / safe)
    bound = rho * energy / m
    if np.any(zero):
        logger.warning("%d of %d estimates are all-zero; their per-antenna SNR counts as 0",
                       int(zero.sum()), h.shape[0])

    return EstimateMetrics(
        nmse=float(np.mean(nmse)),
        mean_snr_per_antenna_db=linear_to_db(float(np.mean(snr))),
        upper_bound_db=linear_to_db(float(np.mean(bound))),
        num_samples=int(h.shape[0]),
        zero_estimates=int(zero.sum()),
    )
