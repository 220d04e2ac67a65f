"""
Report writing: JSON reports, CSV curves and sweep tables, optional PDF summary

Every file is written to a temporary sibling first and moved into place, so
a reader never sees a partial report.
"""
import json
import os
import tempfile
import logging
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from modules.approx_solver import ApproxResult
from modules.errors import ContractViolation
from modules.exact_solver import Grid, SolveResult, iter_grid_values
from modules.rank_core import Ensemble, GroundTruth, columns_for, rank_rows
from modules.utils import format_point, format_value, sanitize_filename
from modules.verifier import VerificationReport

logger = logging.getLogger(__name__)

REPORT_FORMAT = 1


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _atomic_write(path: Path, write: Callable[[Path], None]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(handle)
    try:
        write(Path(temp_name))
        os.replace(temp_name, path)
    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise
    return path


def write_json(path: Path, data: Dict) -> Path:
    text = json.dumps(data, indent=2, default=_json_default) + "\n"
    return _atomic_write(path, lambda temp: temp.write_text(text, encoding='utf-8'))


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    return _atomic_write(path, lambda temp: frame.to_csv(temp, index=False, float_format='%.12g'))


def build_report(scenario_data: Dict, stages, solve: Optional[SolveResult] = None,
                 approx: Optional[ApproxResult] = None,
                 verification: Optional[VerificationReport] = None,
                 sweep: Optional[List[Dict]] = None, timestamp: bool = True,
                 functions: Optional[List[str]] = None) -> Dict:
    """Assemble the report mapping; generated_at is the only field that varies between runs"""
    report: Dict = {'format': REPORT_FORMAT}
    if timestamp:
        report['generated_at'] = datetime.now().isoformat(timespec='seconds')
    report['scenario'] = scenario_data
    if functions:
        report['functions'] = list(functions)
    report['stages'] = list(stages)
    if solve is not None:
        report['exact'] = solve.to_dict()
    if approx is not None:
        report['approx'] = approx.to_dict()
    if verification is not None:
        report['verification'] = verification.to_dict()
    if sweep:
        report['sweep'] = sweep
    return report


def curve_frame(ensemble: Ensemble, truth: GroundTruth, grid: Grid) -> pd.DataFrame:
    """Samples x, Q_1..Q_n, h_f, g_0, g_f along a one-dimensional grid"""
    if ensemble.domain.dimension != 1:
        raise ContractViolation("curves are emitted for one-dimensional domains only")
    honest = columns_for(ensemble.n, truth.honest_set)
    f = ensemble.f
    parts = []
    for _, points, matrix in iter_grid_values(ensemble, grid):
        frame = pd.DataFrame(matrix, columns=[f"Q_{i}" for i in ensemble.indices])
        frame.insert(0, 'x', points[:, 0])
        frame['h_f'] = rank_rows(matrix, f + 1)
        frame['g_0'] = rank_rows(matrix[:, honest], 1)
        frame['g_f'] = rank_rows(matrix[:, honest], f + 1)
        parts.append(frame)
    return pd.concat(parts, ignore_index=True)


def _pdf_styles():
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        'ReportTitle',
        parent=styles['Title'],
        fontSize=16,
        textColor=colors.HexColor('#1f4788'),
        spaceAfter=12
    )
    heading_style = ParagraphStyle(
        'ReportHeading',
        parent=styles['Heading2'],
        fontSize=12,
        textColor=colors.HexColor('#2e86ab'),
        spaceAfter=6
    )
    return styles, title_style, heading_style


def _table(rows: List[List[str]], widths: List[float]) -> Table:
    table = Table(rows, colWidths=widths, repeatRows=1)
    table.setStyle(TableStyle([
        ('FONTSIZE', (0, 0), (-1, -1), 8),
        ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
        ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#dfe7f2')),
        ('GRID', (0, 0), (-1, -1), 0.25, colors.grey),
        ('BOTTOMPADDING', (0, 0), (-1, -1), 2),
    ]))
    return table


def write_pdf(path: Path, report: Dict) -> Path:
    """One-page-per-section summary of a report; identical reports give identical bytes"""
    styles, title_style, heading_style = _pdf_styles()
    scenario = report.get('scenario', {})
    content = [Paragraph(f"Robust min-max report: {scenario.get('name', '')}", title_style)]
    content.append(Paragraph(
        f"<b>n</b> = {scenario.get('n')}, <b>f</b> = {scenario.get('f')}, "
        f"<b>domain</b> = {scenario.get('domain', {}).get('lower')} to {scenario.get('domain', {}).get('upper')}",
        styles['Normal']))
    content.append(Spacer(1, 0.2 * inch))

    if report.get('functions'):
        rows = [['i', 'Q_i']] + [[str(i), label] for i, label in enumerate(report['functions'], start=1)]
        content.append(_table(rows, [0.4 * inch, 5.0 * inch]))
        content.append(Spacer(1, 0.2 * inch))

    if 'exact' in report:
        exact = report['exact']
        content.append(Paragraph("Exact minimizer of h_f", heading_style))
        content.append(Paragraph(
            f"x&#770; = {format_point(exact['x_hat'])}, v&#770; = {format_value(exact['v_hat'])}, "
            f"error bound {format_value(exact['certificate']['error_bound'])}", styles['Normal']))
        content.append(Spacer(1, 0.2 * inch))

    if 'approx' in report:
        approx = report['approx']
        content.append(Paragraph("Partition approximation", heading_style))
        content.append(Paragraph(
            f"x&#772; = {format_point(approx['x_bar'])}, h_f = {format_value(approx['value'])}, "
            f"epsilon = {format_value(approx['epsilon'])}, {approx['cell_count']} cells, "
            f"terminated by {approx['terminated_by']}", styles['Normal']))
        content.append(Spacer(1, 0.2 * inch))

    if 'verification' in report:
        verification = report['verification']
        summary = verification['summary']
        content.append(Paragraph("Checks", heading_style))
        content.append(Paragraph(", ".join(f"{status}: {count}" for status, count in summary.items()),
                                 styles['Normal']))
        rows = [['Check', 'Status', 'lhs', 'rel', 'rhs', 'tolerance']]
        for check in verification['checks']:
            rows.append([check['name'], check['status'], format_value(check['lhs']), check['relation'],
                         format_value(check['rhs']), format_value(check['tolerance'], 3)])
        content.append(_table(rows, [2.6 * inch, 0.9 * inch, 1.0 * inch, 0.4 * inch, 1.0 * inch, 0.8 * inch]))

    def build(temp: Path) -> None:
        doc = SimpleDocTemplate(
            str(temp),
            pagesize=letter,
            rightMargin=0.5 * inch,
            leftMargin=0.5 * inch,
            topMargin=0.5 * inch,
            bottomMargin=0.5 * inch,
            title=f"Robust min-max report: {scenario.get('name', '')}",
            invariant=1,
        )
        doc.build(content)

    return _atomic_write(path, build)


class ReportWriter:
    """Writes the artifacts of one scenario run into an output directory"""

    def __init__(self, out_dir: Path, name: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stem = sanitize_filename(name)

    def path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.stem}.{suffix}"

    def write_report(self, report: Dict) -> Path:
        path = write_json(self.path("report.json"), report)
        logger.info(f"Wrote report {path}")
        return path

    def write_curve(self, ensemble: Ensemble, truth: GroundTruth, grid: Grid) -> Path:
        return write_csv(self.path("curve.csv"), curve_frame(ensemble, truth, grid))

    def write_sweep(self, rows: List[Dict]) -> Path:
        return write_csv(self.path("sweep.csv"), pd.DataFrame(rows))

    def write_pdf(self, report: Dict) -> Path:
        return write_pdf(self.path("report.pdf"), report)
