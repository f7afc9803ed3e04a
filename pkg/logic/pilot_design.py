"""
pilot_design.py - Pilot sequences that make the measurement-to-channel map one-to-one

A pilot of length N whose symbol angles evenly sample (0, pi/2] separates
every pair of candidate channels (noiseless) as soon as
N >= ceil(pi / (2 * alpha)), where alpha is the smallest, over channel pairs,
of the largest per-antenna phase difference between the two channels.
Phase differences are circular distances in [0, pi].
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from logic.errors import DomainError
from logic.quantized_frontend import noiseless_signatures

logger = logging.getLogger(__name__)

# Pair angles at or below this are treated as element-wise equal phases
DEGENERATE_ANGLE = 1e-12
DEFAULT_MAX_LISTED_PAIRS = 100
_POWER_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class PilotSequence:
    symbols: np.ndarray
    power: float

    def __post_init__(self):
        symbols = np.array(self.symbols, dtype=np.complex128).reshape(-1)
        if symbols.size == 0:
            raise DomainError("A pilot sequence needs at least one symbol")
        if not self.power > 0:
            raise DomainError(f"Pilot power must be positive, got {self.power!r}")
        if not np.allclose(np.abs(symbols) ** 2, self.power, rtol=_POWER_RTOL, atol=0.0):
            raise DomainError("Every pilot symbol must carry the per-symbol power P_t")
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)

    @property
    def length(self):
        return self.symbols.shape[0]

    @property
    def angles(self):
        return np.angle(self.symbols)

    def to_dict(self):
        return {"length": self.length, "power": self.power, "angles": self.angles.tolist()}

    @classmethod
    def from_dict(cls, data):
        angles = np.asarray(data["angles"], dtype=np.float64)
        return cls(math.sqrt(data["power"]) * np.exp(1j * angles), float(data["power"]))


def design_pilot(n, power=1.0):
    """symbol_k = sqrt(P_t) exp(j k pi / (2n)), k = 1..n"""
    if int(n) != n or n < 1:
        raise DomainError(f"Pilot length must be a positive integer, got {n!r}")
    if not power > 0:
        raise DomainError(f"Pilot power must be positive, got {power!r}")
    angles = np.arange(1, int(n) + 1, dtype=np.float64) * (np.pi / (2.0 * n))
    return PilotSequence(math.sqrt(power) * np.exp(1j * angles), float(power))


def _entries(channel):
    return np.asarray(getattr(channel, "entries", channel), dtype=np.complex128).reshape(-1)


def _channel_matrix(channels):
    matrix = getattr(channels, "matrix", None)
    if matrix is not None:
        return matrix
    rows = [_entries(c) for c in channels]
    if not rows:
        return np.zeros((0, 0), dtype=np.complex128)
    return np.stack(rows)


def pair_max_angle(h_u, h_v):
    """max over antennas of the circular phase distance between two channels"""
    u, v = _entries(h_u), _entries(h_v)
    if u.shape != v.shape:
        raise DomainError(f"Channels have different lengths ({u.size} vs {v.size})")
    for name, entries in (("first", u), ("second", v)):
        zeros = np.flatnonzero(entries == 0)
        if zeros.size:
            raise DomainError(f"Element {int(zeros[0])} of the {name} channel is zero; its phase is undefined")
    return float(_phase_gaps(u[np.newaxis, :], v)[0])


def _phase_gaps(rows, reference):
    """Largest circular phase distance of each row to `reference`; equal phases give exactly 0.0"""
    gaps = np.max(np.abs(np.angle(rows * np.conj(reference))), axis=-1)
    gaps[gaps <= DEGENERATE_ANGLE] = 0.0
    return gaps


@dataclass(frozen=True)
class AlphaScan:
    """Result of the exhaustive pair scan: the mapping angle and the pair attaining it"""
    alpha: float
    closest_pair: tuple

    @property
    def degenerate(self):
        return self.alpha <= DEGENERATE_ANGLE


def _scan_rows(phasors, rows):
    best, best_pair = math.inf, None
    for i in rows:
        rest = phasors[i + 1:]
        if rest.shape[0] == 0:
            continue
        pair_angles = _phase_gaps(rest, phasors[i])
        j = int(np.argmin(pair_angles))
        if pair_angles[j] < best:
            best, best_pair = float(pair_angles[j]), (int(i), int(i + 1 + j))
    return best, best_pair


def scan_mapping_angle(channels, jobs=1):
    matrix = _channel_matrix(channels)
    if matrix.shape[0] < 2:
        raise DomainError("The mapping angle needs at least two channels")
    zero_users, zero_elems = np.nonzero(matrix == 0)
    if zero_users.size:
        raise DomainError(
            f"Channel {int(zero_users[0])} has a zero at element {int(zero_elems[0])}; its phase is undefined")

    # the circular distance only depends on the phases
    phasors = matrix / np.abs(matrix)
    n = phasors.shape[0]
    if jobs <= 1:
        partials = [_scan_rows(phasors, range(n))]
    else:
        chunks = [range(start, n, jobs) for start in range(jobs)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(lambda rows: _scan_rows(phasors, rows), chunks))

    candidates = [(a, p) for a, p in partials if p is not None]
    alpha, pair = min(candidates, key=lambda item: (item[0], item[1]))
    scan = AlphaScan(alpha, pair)
    if scan.degenerate:
        logger.warning("Channels %d and %d have element-wise equal phases; no pilot length separates them",
                       *pair)
    return scan


def compute_alpha(channels, jobs=1):
    return scan_mapping_angle(channels, jobs).alpha


def min_pilot_length(alpha):
    if not alpha > 0:
        raise DomainError(f"Mapping angle must be positive, got {alpha!r} (degenerate channel set)")
    if alpha > math.pi:
        raise DomainError(f"Mapping angle cannot exceed pi, got {alpha!r}")
    return max(1, math.ceil(math.pi / (2.0 * alpha)))


def corollary1_length(m, delta_phi):
    """Closed-form pilot length for a half-wavelength ULA and single-path users"""
    if int(m) != m or m < 2:
        raise DomainError(f"The closed form needs at least 2 antennas, got {m!r}")
    if not (0.0 < delta_phi < math.pi):
        raise DomainError(f"delta_phi must lie in (0, pi), got {delta_phi!r}")
    return math.ceil(1.0 / ((m - 1) * 4.0 * math.sin(delta_phi / 2.0) ** 2))


@dataclass
class BijectivityReport:
    alpha: float
    min_pilot_length: int
    pilot_length: int
    pairs_total: int
    pairs_distinguishable: int
    channels_uniquely_identified_fraction: float
    undistinguishable_pairs: list = field(default_factory=list)
    undistinguishable_pairs_truncated: bool = False
    degenerate: bool = False
    closest_pair: tuple = None
    corollary1_length: int = None

    @property
    def distinguishable_fraction(self):
        if self.pairs_total == 0:
            return 1.0
        return self.pairs_distinguishable / self.pairs_total

    @property
    def bijective(self):
        return self.pairs_distinguishable == self.pairs_total

    def to_dict(self):
        data = asdict(self)
        data["undistinguishable_pairs"] = [list(p) for p in self.undistinguishable_pairs]
        data["closest_pair"] = list(self.closest_pair) if self.closest_pair is not None else None
        data["distinguishable_fraction"] = self.distinguishable_fraction
        data["bijective"] = self.bijective
        return data


def _signature_groups(signatures):
    """Users grouped by identical quantized signature, in first-seen order"""
    bits = np.concatenate([
        (signatures.real > 0).reshape(signatures.shape[0], -1),
        (signatures.imag > 0).reshape(signatures.shape[0], -1),
    ], axis=1)
    packed = np.packbits(bits, axis=1)
    groups = {}
    for user, row in enumerate(packed):
        groups.setdefault(row.tobytes(), []).append(user)
    return list(groups.values())


def distinguishability_report(channels, pilot, alpha_scan=None, max_listed_pairs=DEFAULT_MAX_LISTED_PAIRS,
                              jobs=1):
    """Noiseless check of sgn(h_u x^T) != sgn(h_v x^T) over every pair of channels

    Two channels are indistinguishable exactly when their signatures are
    equal, so grouping users by signature gives the exact pair counts.
    """
    matrix = _channel_matrix(channels)
    n = matrix.shape[0]
    if n < 2:
        raise DomainError("A distinguishability report needs at least two channels")

    groups = _signature_groups(noiseless_signatures(matrix, pilot.symbols))
    pairs_total = n * (n - 1) // 2
    clashing = sum(len(g) * (len(g) - 1) // 2 for g in groups)
    unique = sum(1 for g in groups if len(g) == 1)

    listed = []
    for group in sorted((g for g in groups if len(g) > 1), key=lambda g: g[0]):
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                listed.append((group[a], group[b]))
    listed.sort()
    truncated = len(listed) > max_listed_pairs
    listed = listed[:max_listed_pairs]

    if alpha_scan is None:
        try:
            alpha_scan = scan_mapping_angle(matrix, jobs)
        except DomainError as exc:
            logger.warning("Mapping angle unavailable: %s", exc)
    alpha = alpha_scan.alpha if alpha_scan is not None else 0.0
    degenerate = alpha_scan is None or alpha_scan.degenerate

    return BijectivityReport(
        alpha=alpha,
        min_pilot_length=None if degenerate else min_pilot_length(alpha),
        pilot_length=pilot.length,
        pairs_total=pairs_total,
        pairs_distinguishable=pairs_total - clashing,
        channels_uniquely_identified_fraction=unique / n,
        undistinguishable_pairs=listed,
        undistinguishable_pairs_truncated=truncated,
        degenerate=degenerate,
        closest_pair=alpha_scan.closest_pair if alpha_scan is not None else None,
    )


def distinguishability_curve(channels, lengths, power=1.0, max_listed_pairs=DEFAULT_MAX_LISTED_PAIRS, jobs=1):
    """One report per pilot length; the pair scan for alpha is shared"""
    try:
        scan = scan_mapping_angle(channels, jobs)
    except DomainError as exc:
        logger.warning("Mapping angle unavailable: %s", exc)
        scan = None
    reports = []
    for n in lengths:
        report = distinguishability_report(channels, design_pilot(n, power), alpha_scan=scan,
                                           max_listed_pairs=max_listed_pairs, jobs=jobs)
        logger.info("N=%d: %.4f of pairs distinguishable, %.4f of channels unique",
                    n, report.distinguishable_fraction, report.channels_uniquely_identified_fraction)
        reports.append(report)
    return reports


@dataclass(frozen=True)
class PilotRequirement:
    num_antennas: int
    alpha: float
    min_pilot_length: int
    corollary1_length: int = None

    def to_dict(self):
        return asdict(self)


def corollary_applies(channels):
    """Single-path, unit-gain, half-wavelength sets with a known angle spacing"""
    return (channels.num_paths == 1 and channels.gain_model == "unit"
            and channels.aoa_separation is not None and 0 < channels.aoa_separation < math.pi
            and math.isclose(channels.geometry.element_spacing, 0.5)
            and channels.geometry.num_antennas >= 2)


def pilot_requirement_curve(scenario, antenna_counts, jobs=1):
    """alpha and the required pilot length when the same users are seen by M antennas"""
    rows = []
    for m in antenna_counts:
        channels = scenario.build(m)
        scan = scan_mapping_angle(channels, jobs)
        corollary = corollary1_length(m, channels.aoa_separation) if corollary_applies(channels) else None
        rows.append(PilotRequirement(
            num_antennas=int(m),
            alpha=scan.alpha,
            min_pilot_length=None if scan.degenerate else min_pilot_length(scan.alpha),
            corollary1_length=corollary,
        ))
        logger.info("M=%d: alpha=%.6g rad, min pilot length %s", m, scan.alpha, rows[-1].min_pilot_length)
    return rows
