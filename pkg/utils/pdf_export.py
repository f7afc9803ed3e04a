"""
PDF Export Module for the channel-estimation workbench
Sweep and bijectivity reports: title, summary table, per-cell detail tables
"""
import logging
from datetime import datetime
from xml.sax.saxutils import escape

from reportlab.lib.colors import black, blue, green, white
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

logger = logging.getLogger(__name__)


def _fmt(value, spec=".4g"):
    if value is None:
        return "-"
    if isinstance(value, float):
        return format(value, spec)
    return str(value)


class PdfExporter:
    """PDF reports built with reportlab platypus flowables"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self.setup_custom_styles()

    def setup_custom_styles(self):
        self.title_style = ParagraphStyle(
            'CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=16,
            spaceAfter=20,
            textColor=blue,
            alignment=TA_CENTER
        )
        self.section_style = ParagraphStyle(
            'SectionHeader',
            parent=self.styles['Heading2'],
            fontSize=13,
            spaceAfter=10,
            spaceBefore=16,
        )
        self.note_style = ParagraphStyle(
            'Note',
            parent=self.styles['Normal'],
            fontSize=9,
            leftIndent=10,
            spaceAfter=6,
        )

    def _table(self, rows, col_widths, header_color=blue):
        table = Table(rows, colWidths=col_widths, repeatRows=1)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), header_color),
            ('TEXTCOLOR', (0, 0), (-1, 0), white),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 8),
            ('GRID', (0, 0), (-1, -1), 0.5, black),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [white, '#f0f0f0'])
        ]))
        return table

    def _build(self, story, output_path):
        doc = SimpleDocTemplate(str(output_path), pagesize=A4, rightMargin=40, leftMargin=40,
                                topMargin=50, bottomMargin=50)
        doc.build(story)

    def _preamble(self, title):
        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        return [Paragraph(title, self.title_style),
                Paragraph(f"Generated on: {timestamp}", self.styles['Normal']),
                Spacer(1, 16)]

    def sweep_story(self, report):
        story = self._preamble("Channel Estimation Sweep Report")
        ok = report.ok_records()
        summary = [
            ['Metric', 'Value'],
            ['Cells', str(len(report.records))],
            ['Succeeded', str(len(ok))],
            ['Failed', str(len(report.failed_records()))],
        ]
        if ok:
            best = min(ok, key=lambda r: r.test_nmse)
            summary.append(['Lowest test NMSE', f"{best.test_nmse:.4g} (M={best.M}, N={best.N}, {best.snr}, "
                                                f"{best.estimator})"])
        story.append(self._table(summary, [1.8 * inch, 4.2 * inch]))

        story.append(Paragraph("Cells", self.section_style))
        rows = [['M', 'N', 'SNR', 'Estimator', 'Test NMSE', 'Train NMSE', 'SNR/ant dB', 'Bound dB', 'Status']]
        for r in report.records:
            rows.append([str(r.M), str(r.N), r.snr, r.estimator, _fmt(r.test_nmse), _fmt(r.train_nmse),
                         _fmt(r.mean_snr_per_antenna_db, ".3f"), _fmt(r.upper_bound_db, ".3f"), r.status])
        widths = [0.4 * inch, 0.4 * inch, 0.7 * inch, 1.1 * inch, 0.8 * inch, 0.8 * inch, 0.8 * inch,
                  0.7 * inch, 0.6 * inch]
        story.append(self._table(rows, widths, header_color=green))

        failed = report.failed_records()
        if failed:
            story.append(Paragraph("Failed cells", self.section_style))
            for r in failed:
                story.append(Paragraph(escape(f"M={r.M}, N={r.N}, {r.snr}, {r.estimator}: {r.reason}"),
                                       self.note_style))
        return story

    def analysis_story(self, analysis):
        story = self._preamble("Pilot Bijectivity Report")
        cs = analysis["channel_set"]
        summary = [
            ['Metric', 'Value'],
            ['Antennas (M)', str(cs['M'])],
            ['Users', str(cs['num_users'])],
            ['Paths (L)', str(cs['L'])],
            ['alpha (rad)', _fmt(analysis['alpha'], ".6e")],
            ['Degenerate', str(analysis['degenerate'])],
            ['Minimum pilot length', _fmt(analysis['min_pilot_length'])],
            ['Closed-form single-path length', _fmt(analysis.get('corollary1_length'))],
        ]
        story.append(self._table(summary, [2.4 * inch, 2.4 * inch]))

        reports = analysis.get("reports", [])
        if reports:
            story.append(Paragraph("Distinguishability by pilot length", self.section_style))
            rows = [['N', 'Pairs', 'Distinguishable', 'Fraction', 'Unique users']]
            for r in reports:
                rows.append([str(r['pilot_length']), str(r['pairs_total']), str(r['pairs_distinguishable']),
                             f"{r['distinguishable_fraction']:.6f}",
                             f"{r['channels_uniquely_identified_fraction']:.6f}"])
            story.append(self._table(rows, [0.6 * inch, 1.3 * inch, 1.3 * inch, 1.0 * inch, 1.0 * inch],
                                     header_color=green))

        requirements = analysis.get("pilot_requirements", [])
        if requirements:
            story.append(Paragraph("Required pilot length versus antennas", self.section_style))
            rows = [['M', 'alpha (rad)', 'Min pilot length', 'Closed form']]
            for row in requirements:
                rows.append([str(row['num_antennas']), _fmt(row['alpha'], ".6e"), _fmt(row['min_pilot_length']),
                             _fmt(row['corollary1_length'])])
            story.append(self._table(rows, [0.6 * inch, 1.4 * inch, 1.3 * inch, 1.1 * inch], header_color=green))
        return story

    def export_sweep_report(self, report, output_path):
        try:
            self._build(self.sweep_story(report), output_path)
            return True, f"PDF report generated successfully at {output_path}"
        except Exception as e:
            logger.error("PDF export failed: %s", e)
            return False, f"Error generating PDF: {str(e)}"

    def export_analysis_report(self, analysis, output_path):
        try:
            self._build(self.analysis_story(analysis), output_path)
            return True, f"PDF report generated successfully at {output_path}"
        except Exception as e:
            logger.error("PDF export failed: %s", e)
            return False, f"Error generating PDF: {str(e)}"
