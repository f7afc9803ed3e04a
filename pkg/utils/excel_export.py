import logging
import math

import openpyxl
from openpyxl.styles import Font, PatternFill

from utils.csv_export import SWEEP_COLUMNS

logger = logging.getLogger(__name__)


def _value(value):
    # Excel has no cell value for infinities
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


HEADER_FILL = PatternFill(start_color="DDEBF7", end_color="DDEBF7", fill_type="solid")
FAILED_FILL = PatternFill(start_color="F8CBAD", end_color="F8CBAD", fill_type="solid")


class ExcelExporter:

    def _append_header(self, sheet, headers):
        sheet.append(headers)
        for cell in sheet[1]:
            cell.font = Font(bold=True)
            cell.fill = HEADER_FILL

    def _autosize(self, sheet):
        for column in sheet.columns:
            max_length = 0
            column_letter = column[0].column_letter
            for cell in column:
                if cell.value is not None:
                    max_length = max(max_length, len(str(cell.value)))
            sheet.column_dimensions[column_letter].width = min(max_length + 2, 50)

    def _series_sheet(self, workbook, title, series, bound=None):
        """One row per M, one column per (estimator, N, snr) series"""
        sheet = workbook.create_sheet(title)
        keys = sorted(series)
        headers = ["M"]
        for estimator, n, snr in keys:
            headers.append(f"{estimator} N={n} {snr}")
            if bound is not None:
                headers.append(f"bound N={n} {snr}")
        self._append_header(sheet, headers)
        antennas = sorted({m for points in series.values() for m, _ in points})
        lookup = {key: dict(points) for key, points in series.items()}
        bound_lookup = {key: dict(points) for key, points in (bound or {}).items()}
        for m in antennas:
            row = [m]
            for key in keys:
                row.append(_value(lookup[key].get(m)))
                if bound is not None:
                    row.append(_value(bound_lookup.get(key, {}).get(m)))
            sheet.append(row)
        self._autosize(sheet)
        return sheet

    def export_sweep_workbook(self, report, filename):
        """Cells sheet plus one sheet per figure (NMSE and per-antenna SNR against M)"""
        try:
            workbook = openpyxl.Workbook()
            sheet = workbook.active
            sheet.title = "Sweep Cells"
            self._append_header(sheet, SWEEP_COLUMNS)
            for record in report.records:
                data = record.to_dict(include_timing=False)
                sheet.append([_value(data[col]) for col in SWEEP_COLUMNS])
                if record.status != "ok":
                    for cell in sheet[sheet.max_row]:
                        cell.fill = FAILED_FILL
            self._autosize(sheet)

            self._series_sheet(workbook, "NMSE vs M", report.series("test_nmse"))
            self._series_sheet(workbook, "SNR vs M", report.series("mean_snr_per_antenna_db"),
                               bound=report.series("upper_bound_db"))
            workbook.save(filename)
            return True, f"Excel file saved to:\n{filename}"
        except Exception as e:
            logger.error("Excel export failed: %s", e)
            return False, f"Failed to save Excel file: {str(e)}"

    def export_analysis_workbook(self, analysis, filename):
        try:
            workbook = openpyxl.Workbook()
            sheet = workbook.active
            sheet.title = "Distinguishability"
            self._append_header(sheet, ["N", "pairs_total", "pairs_distinguishable", "distinguishable_fraction",
                                        "channels_uniquely_identified_fraction", "bijective"])
            for r in analysis.get("reports", []):
                sheet.append([r["pilot_length"], r["pairs_total"], r["pairs_distinguishable"],
                              r["distinguishable_fraction"], r["channels_uniquely_identified_fraction"],
                              r["bijective"]])
            self._autosize(sheet)

            summary = workbook.create_sheet("Mapping Angle")
            self._append_header(summary, ["Metric", "Value"])
            for key in ("alpha", "degenerate", "min_pilot_length", "corollary1_length"):
                summary.append([key, analysis.get(key)])
            self._autosize(summary)

            if analysis.get("pilot_requirements"):
                req = workbook.create_sheet("Pilots vs M")
                self._append_header(req, ["M", "alpha", "min_pilot_length", "corollary1_length"])
                for row in analysis["pilot_requirements"]:
                    req.append([row["num_antennas"], row["alpha"], row["min_pilot_length"],
                                row["corollary1_length"]])
                self._autosize(req)
            workbook.save(filename)
            return True, f"Excel file saved to:\n{filename}"
        except Exception as e:
            logger.error("Excel export failed: %s", e)
            return False, f"Failed to save Excel file: {str(e)}"
