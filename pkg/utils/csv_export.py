"""
csv_export.py - Sweep tables, figure data and loss histories as CSV
"""
import csv
import logging
from pathlib import Path

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["M", "N", "snr", "estimator", "status", "test_nmse", "train_nmse",
                 "mean_snr_per_antenna_db", "upper_bound_db", "train_size", "test_size",
                 "alpha", "min_pilot_length", "reason"]


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


class CsvExporter:
    """Plain-text tables; every export returns (success, message)"""

    def _write(self, rows, header, output_path, what):
        try:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            with open(output_path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(v) for v in row])
            return True, f"{what} written to {output_path}"
        except OSError as e:
            logger.error("Could not write %s to %s: %s", what, output_path, e)
            return False, f"Failed to write {what}: {e}"

    def export_sweep(self, report, output_path, include_timing=False):
        header = SWEEP_COLUMNS + (["wall_time"] if include_timing else [])
        rows = []
        for record in report.records:
            data = record.to_dict(include_timing)
            rows.append([data[col] for col in header])
        return self._write(rows, header, output_path, "Sweep table")

    def export_nmse_vs_antennas(self, report, output_path):
        """NMSE against M, one series per (estimator, N, snr)"""
        rows = []
        for (estimator, n, snr), points in sorted(report.series("test_nmse").items()):
            for m, value in points:
                rows.append([estimator, n, snr, m, value])
        return self._write(rows, ["estimator", "N", "snr", "M", "test_nmse"], output_path, "NMSE figure data")

    def export_snr_vs_antennas(self, report, output_path):
        """Per-antenna SNR against M with the perfect-CSI bound alongside"""
        snr = report.series("mean_snr_per_antenna_db")
        bound = report.series("upper_bound_db")
        rows = []
        for key in sorted(snr):
            estimator, n, label = key
            for (m, value), (_, limit) in zip(snr[key], bound[key]):
                rows.append([estimator, n, label, m, value, limit])
        header = ["estimator", "N", "snr", "M", "mean_snr_per_antenna_db", "upper_bound_db"]
        return self._write(rows, header, output_path, "SNR figure data")

    def export_loss_history(self, history, output_path):
        rows = [[r.epoch, r.train_nmse, r.test_nmse] for r in history]
        return self._write(rows, ["epoch", "train_nmse", "test_nmse"], output_path, "Loss history")

    def export_pilot_requirements(self, rows, output_path):
        """`rows` are PilotRequirement dicts as stored in the analysis report"""
        keys = ("num_antennas", "alpha", "min_pilot_length", "corollary1_length")
        data = [[r[k] for k in keys] for r in rows]
        return self._write(data, ["M", "alpha", "min_pilot_length", "corollary1_length"], output_path,
                           "Pilot requirement table")
