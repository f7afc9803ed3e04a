"""
TXT Export Module for the channel-estimation workbench
Human-readable summaries of bijectivity analyses and sweeps
"""
import logging
from datetime import datetime
from pathlib import Path

logger = logging.getLogger(__name__)


def _fmt(value, spec=".6g"):
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return format(value, spec)
    return str(value)


class TxtExporter:
    """Text summaries written with the same banner layout for every report"""

    def __init__(self):
        self.separator = "=" * 80
        self.section_separator = "-" * 40

    def _header(self, title):
        return [title, f"Generated on: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}", self.separator, ""]

    def analysis_lines(self, analysis):
        lines = self._header("BIJECTIVITY ANALYSIS")
        cs = analysis["channel_set"]
        lines.append("CHANNEL SET")
        lines.append(self.section_separator)
        lines.append(f"Antennas (M): {cs['M']}   Users: {cs['num_users']}   Paths (L): {cs['L']}")
        lines.append(f"Gain model: {cs['gain_model']}   AoA separation: {_fmt(cs.get('aoa_separation'))}")
        lines.append("")
        lines.append("MAPPING ANGLE")
        lines.append(self.section_separator)
        lines.append(f"alpha: {_fmt(analysis['alpha'], '.6e')} rad   closest pair: {analysis.get('closest_pair')}")
        if analysis["degenerate"]:
            lines.append("DEGENERATE: two channels coincide up to phase; no pilot length separates them")
        lines.append(f"Minimum pilot length (mapping-angle bound): {_fmt(analysis['min_pilot_length'])}")
        lines.append(f"Closed-form single-path length: {_fmt(analysis.get('corollary1_length'))}")
        lines.append("")

        reports = analysis.get("reports", [])
        if reports:
            lines.append("DISTINGUISHABILITY")
            lines.append(self.section_separator)
            lines.append(f"{'N':>6} {'pairs':>14} {'distinct':>14} {'fraction':>10} {'unique users':>13}")
            for r in reports:
                lines.append(f"{r['pilot_length']:>6} {r['pairs_total']:>14} {r['pairs_distinguishable']:>14} "
                             f"{r['distinguishable_fraction']:>10.6f} "
                             f"{r['channels_uniquely_identified_fraction']:>13.6f}")
            lines.append("")

        requirements = analysis.get("pilot_requirements", [])
        if requirements:
            lines.append("PILOT LENGTH VERSUS ANTENNAS")
            lines.append(self.section_separator)
            for row in requirements:
                lines.append(f"  M={row['num_antennas']:<4} alpha={_fmt(row['alpha'], '.6e')} "
                             f"N_min={_fmt(row['min_pilot_length'])} closed-form={_fmt(row['corollary1_length'])}")
            lines.append("")
        lines.append(self.separator)
        return lines

    def sweep_lines(self, report):
        lines = self._header("SWEEP SUMMARY")
        lines.append(f"Cells: {len(report.records)}   failed: {len(report.failed_records())}")
        lines.append(self.section_separator)
        for r in report.records:
            if r.status != "ok":
                lines.append(f"  M={r.M:<4} N={r.N:<4} {r.snr:<10} {r.estimator:<17} FAILED: {r.reason}")
                continue
            lines.append(f"  M={r.M:<4} N={r.N:<4} {r.snr:<10} {r.estimator:<17} "
                         f"NMSE={_fmt(r.test_nmse, '.4e')} "
                         f"SNR/ant={_fmt(r.mean_snr_per_antenna_db, '.3f')} dB "
                         f"bound={_fmt(r.upper_bound_db, '.3f')} dB")
        lines.append(self.separator)
        return lines

    def _write(self, lines, output_path, what):
        try:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            with open(output_path, "w", encoding="utf-8") as f:
                f.write("\n".join(lines) + "\n")
            return True, f"{what} exported successfully to {output_path}"
        except OSError as e:
            logger.error("Could not write %s: %s", output_path, e)
            return False, f"Error exporting {what}: {e}"

    def export_analysis_summary(self, analysis, output_path):
        return self._write(self.analysis_lines(analysis), output_path, "Analysis summary")

    def export_sweep_summary(self, report, output_path):
        return self._write(self.sweep_lines(report), output_path, "Sweep summary")
