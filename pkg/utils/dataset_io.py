"""
dataset_io.py - Channel and measurement dataset files

A dataset is a JSON manifest plus binary blobs next to it:
  <stem>.json       manifest
  <stem>.bin        num_users * M complex entries as little-endian float64,
                    interleaved (Re, Im), row-major by user
  <stem>.meas.bin   optional quantized measurements, int8 +-1, per user the
                    M x N real parts then the M x N imaginary parts, row-major
"""
import json
import logging
from pathlib import Path

import numpy as np

from logic.channel_model import ArrayGeometry, ChannelSet
from logic.errors import DatasetParseError, DomainError, FormatVersionError
from logic.pilot_design import PilotSequence, design_pilot
from logic.quantized_frontend import SNR_REFERENCE, MeasurementSet, NoiseSpec

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
COMPLEX_LAYOUT = "interleaved_re_im"
CHANNEL_DTYPE = "f64_le"
MEASUREMENT_DTYPE = "i8"
MEASUREMENT_LAYOUT = "user_re_then_im_row_major"

_REQUIRED_KEYS = ("format_version", "M", "num_users", "L", "seed", "complex_layout", "dtype")


def check_format_version(version, path):
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise DatasetParseError(f"Unreadable format_version {version!r}", path, "format_version") from None
    supported = int(FORMAT_VERSION.split(".")[0])
    if major > supported:
        raise FormatVersionError(
            f"File format version {version} is newer than supported {FORMAT_VERSION}", path, "format_version")


def read_manifest(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except OSError as e:
        raise DatasetParseError(f"Cannot read manifest: {e}", path) from e
    except json.JSONDecodeError as e:
        raise DatasetParseError(f"Manifest is not valid JSON: {e.msg}", path, f"line {e.lineno}") from e
    if not isinstance(manifest, dict):
        raise DatasetParseError("Manifest must be a JSON object", path)
    return manifest


def _blob_path(manifest_path, manifest, key, default_suffix):
    manifest_path = Path(manifest_path)
    name = manifest.get(key) or manifest_path.with_suffix(default_suffix).name
    return manifest_path.parent / name


def _read_blob(path, manifest_path):
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise DatasetParseError(f"Cannot read blob {path}: {e}", manifest_path) from e


def save_channels(channel_set, path, extra=None):
    """Write `channel_set` as <stem>.json + <stem>.bin; returns the manifest dict"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = path.with_suffix(".bin")
    matrix = channel_set.matrix
    interleaved = np.empty(matrix.shape + (2,), dtype="<f8")
    interleaved[..., 0] = matrix.real
    interleaved[..., 1] = matrix.imag
    blob.write_bytes(interleaved.tobytes(order="C"))

    manifest = {
        "format_version": FORMAT_VERSION,
        "M": channel_set.geometry.num_antennas,
        "num_users": len(channel_set),
        "L": channel_set.num_paths,
        "seed": channel_set.seed,
        "complex_layout": COMPLEX_LAYOUT,
        "dtype": CHANNEL_DTYPE,
        "element_spacing": channel_set.geometry.element_spacing,
        "gain_model": channel_set.gain_model,
        "aoa_separation": channel_set.aoa_separation,
        "blob": blob.name,
    }
    if channel_set.path_aoas is not None:
        manifest["path_aoas"] = np.asarray(channel_set.path_aoas, dtype=np.float64).tolist()
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=4)
    logger.info("Saved %d channels (M=%d) to %s", len(channel_set), manifest["M"], path)
    return manifest


def _read_path_aoas(manifest, users, paths, path):
    """Optional per-user path angles, shape (num_users, L)"""
    if manifest.get("path_aoas") is None:
        return None
    try:
        aoas = np.asarray(manifest["path_aoas"], dtype=np.float64)
    except (TypeError, ValueError):
        raise DatasetParseError("path_aoas must be a list of numbers per user", path, "path_aoas") from None
    if aoas.shape != (users, paths):
        raise DatasetParseError(f"path_aoas has shape {aoas.shape}, expected ({users}, {paths})", path, "path_aoas")
    aoas.setflags(write=False)
    return aoas


def load_channels(path):
    path = Path(path)
    manifest = read_manifest(path)
    for key in _REQUIRED_KEYS:
        if key not in manifest:
            raise DatasetParseError(f"Manifest is missing '{key}'", path, key)
    check_format_version(manifest["format_version"], path)
    if manifest["complex_layout"] != COMPLEX_LAYOUT:
        raise DatasetParseError(f"Unsupported complex_layout {manifest['complex_layout']!r}", path, "complex_layout")
    if manifest["dtype"] != CHANNEL_DTYPE:
        raise DatasetParseError(f"Unsupported dtype {manifest['dtype']!r}", path, "dtype")
    try:
        m, users, paths = int(manifest["M"]), int(manifest["num_users"]), int(manifest["L"])
    except (TypeError, ValueError):
        raise DatasetParseError("M, num_users and L must be integers", path) from None
    if m < 1 or users < 0 or paths < 1:
        raise DatasetParseError(f"Invalid dimensions M={m}, num_users={users}, L={paths}", path)

    blob_path = _blob_path(path, manifest, "blob", ".bin")
    raw = _read_blob(blob_path, path)
    expected = users * m * 2 * 8
    if len(raw) != expected:
        raise DatasetParseError(
            f"Length mismatch: M={m}, num_users={users} needs {expected} bytes, blob has {len(raw)}",
            path, blob_path.name)

    values = np.frombuffer(raw, dtype="<f8").reshape(users, m, 2)
    finite = np.isfinite(values)
    if not finite.all():
        user, element, _ = (int(i) for i in np.argwhere(~finite)[0])
        raise DatasetParseError(f"Non-finite value in user {user}, element {element}", path, f"user {user}")

    matrix = np.empty((users, m), dtype=np.complex128)
    matrix.real = values[..., 0]
    matrix.imag = values[..., 1]
    path_aoas = _read_path_aoas(manifest, users, paths, path)
    try:
        return ChannelSet.from_matrix(
            matrix,
            ArrayGeometry(m, float(manifest.get("element_spacing", 0.5))),
            seed=int(manifest["seed"]),
            num_paths=paths,
            gain_model=manifest.get("gain_model") or "unit",
            aoa_separation=manifest.get("aoa_separation"),
            path_aoas=path_aoas,
        )
    except DomainError as e:
        raise DatasetParseError(str(e), path) from e


def save_measurements(measurements, path):
    """Channel container plus a `measurements` manifest section and <stem>.meas.bin"""
    path = Path(path)
    pilot = measurements.pilot
    blob = path.with_suffix(".meas.bin")
    signs = measurements.signs
    packed = np.stack([signs.real, signs.imag], axis=1).astype(np.int8)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob.write_bytes(packed.tobytes(order="C"))
    section = {
        "N": pilot.length,
        "pilot": pilot.to_dict(),
        "noise": measurements.noise.to_dict(),
        "snr_reference": SNR_REFERENCE,
        "reference_energy": measurements.reference_energy,
        "nominal_sigma2": measurements.nominal_sigma2,
        "dtype": MEASUREMENT_DTYPE,
        "layout": MEASUREMENT_LAYOUT,
        "blob": blob.name,
    }
    return save_channels(measurements.channels, path, extra={"measurements": section})


def _restore_pilot(section, path):
    try:
        n = int(section["N"])
        pilot_data = section["pilot"]
        power = float(pilot_data["power"])
        angles = np.asarray(pilot_data["angles"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetParseError(f"Malformed pilot description: {e}", path, "measurements.pilot") from None
    if angles.shape != (n,):
        raise DatasetParseError(f"Pilot lists {angles.size} angles for N={n}", path, "measurements.pilot")
    designed = design_pilot(n, power)
    if np.allclose(designed.angles, angles, rtol=0.0, atol=1e-12):
        return designed
    return PilotSequence.from_dict(pilot_data)


def load_measurements(path):
    path = Path(path)
    channels = load_channels(path)
    manifest = read_manifest(path)
    section = manifest.get("measurements")
    if not isinstance(section, dict):
        raise DatasetParseError("Manifest has no 'measurements' section", path, "measurements")
    if section.get("dtype") != MEASUREMENT_DTYPE or section.get("layout") != MEASUREMENT_LAYOUT:
        raise DatasetParseError("Unsupported measurement dtype or layout", path, "measurements")
    pilot = _restore_pilot(section, path)
    try:
        noise = NoiseSpec.from_dict(section.get("noise") or {})
    except ValueError as e:
        raise DatasetParseError(str(e), path, "measurements.noise") from e

    users, m, n = len(channels), channels.geometry.num_antennas, pilot.length
    blob_path = _blob_path(path, section, "blob", ".meas.bin")
    raw = _read_blob(blob_path, path)
    if len(raw) != users * 2 * m * n:
        raise DatasetParseError(
            f"Length mismatch: measurements need {users * 2 * m * n} bytes, blob has {len(raw)}",
            path, blob_path.name)
    packed = np.frombuffer(raw, dtype=np.int8).reshape(users, 2, m, n)
    bad = np.abs(packed) != 1
    if bad.any():
        user = int(np.argwhere(bad)[0][0])
        raise DatasetParseError(f"Measurement of user {user} holds a value other than +-1", path, f"user {user}")
    signs = packed[:, 0].astype(np.float64) + 1j * packed[:, 1].astype(np.float64)
    signs.setflags(write=False)
    reference = float(section.get("reference_energy") or 0.0)
    return MeasurementSet(channels, pilot, noise, signs, reference)
