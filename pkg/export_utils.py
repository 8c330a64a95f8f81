import base64
import html
import io
import logging
import shlex
import zipfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from docx import Document
from docx.enum.text import WD_ALIGN_PARAGRAPH
from docx.shared import Pt
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from eqsolver import SolveReport
from thermo import GasState, MixtureModel, frozen_sound_speed, mixture_props
from utils import format_sig

logger = logging.getLogger(__name__)

KV_HEADER = "# eqgas-kv 1"

MIME_TYPES = {
    'kv': 'text/plain',
    'txt': 'text/plain',
    'html': 'text/html',
    'pdf': 'application/pdf',
    'docx': 'application/vnd.openxmlformats-officedocument.wordprocessingml.document',
    'zip': 'application/zip',
}

Scalar = Union[float, int, str, bool]


@dataclass
class ReportSection:
    """One block of a report: scalar summary values plus an optional species table.

    `key` prefixes every entry of this section in the key-value document.
    """
    key: str
    title: str
    summary: Dict[str, Scalar] = field(default_factory=dict)
    units: Dict[str, str] = field(default_factory=dict)
    table: Optional[pd.DataFrame] = None


@dataclass
class ReportDocument:
    title: str
    sections: List[ReportSection] = field(default_factory=list)
    converged: bool = True
    notes: List[str] = field(default_factory=list)


def build_report(title: str, sections: Sequence[ReportSection], converged: bool = True,
                 notes: Sequence[str] = ()) -> ReportDocument:
    """Assemble sections into a report"""
    keys = [section.key for section in sections]
    duplicates = sorted({key for key in keys if keys.count(key) > 1})
    if duplicates:
        raise ValueError(f"duplicate section keys: {', '.join(duplicates)}")
    return ReportDocument(title=title, sections=list(sections), converged=converged,
                          notes=list(notes))


def composition_table(model: MixtureModel, state: GasState) -> pd.DataFrame:
    """Species table with mole fraction, mass fraction and specific molarity"""
    return pd.DataFrame(
        {
            'X': state.X,
            'Y': state.Y(model),
            'n_s': np.asarray(state.ns, dtype=float),
        },
        index=pd.Index(model.names, name='species'),
    )


def state_report_section(model: MixtureModel, state: GasState, key: str, title: str,
                         velocity: Optional[float] = None) -> ReportSection:
    """Composition table and thermodynamic summary of one gas state"""
    props = mixture_props(model, state)
    summary: Dict[str, Scalar] = {
        'T': state.T,
        'p': state.p,
        'rho': state.rho,
        'e': props.e,
        'h': props.h,
        's': props.s,
        'M_mix': props.M_mix,
        'gamma_frozen': props.gamma_frozen,
        'a_frozen': frozen_sound_speed(model, state),
    }
    units = {'T': 'K', 'p': 'Pa', 'rho': 'kg/m3', 'e': 'J/kg', 'h': 'J/kg', 's': 'J/kg/K',
             'M_mix': 'kg/mol', 'a_frozen': 'm/s'}
    if velocity is not None:
        summary['v'] = velocity
        summary['mach_frozen'] = velocity / summary['a_frozen']
        units['v'] = 'm/s'
    if props.out_of_range:
        summary['thermo_clamped'] = True
    return ReportSection(key=key, title=title, summary=summary, units=units,
                         table=composition_table(model, state))


def solver_report_section(report: SolveReport, key: str = 'solver',
                          title: str = 'Solver statistics') -> ReportSection:
    summary: Dict[str, Scalar] = {
        'mode': report.mode,
        'converged': report.converged,
        'iterations': report.iterations,
        'residual': report.final_residual,
    }
    if report.pruned_elements:
        summary['pruned_elements'] = ','.join(report.pruned_elements)
    if report.range_flags:
        summary['range_flags'] = ';'.join(report.range_flags)
    return ReportSection(key=key, title=title, summary=summary)


def _kv_value(value: Scalar) -> str:
    # repr keeps every bit of a double
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value).replace('\n', ' ')


def export_to_kv(doc: ReportDocument, argv: Optional[Sequence[str]] = None) -> str:
    """Line-oriented `key = value` document with a schema header"""
    lines = [KV_HEADER]
    if argv is not None:
        lines.append(f"input.argv = {shlex.join(list(argv))}")
    lines.append(f"title = {doc.title}")
    lines.append(f"converged = {_kv_value(doc.converged)}")
    for i, note in enumerate(doc.notes):
        lines.append(f"note.{i} = {_kv_value(note)}")

    for section in doc.sections:
        for name, value in section.summary.items():
            lines.append(f"{section.key}.{name} = {_kv_value(value)}")
        if section.table is not None:
            for column in section.table.columns:
                for species, value in section.table[column].items():
                    lines.append(f"{section.key}.{column}.{species} = {_kv_value(value)}")
    return '\n'.join(lines) + '\n'


def parse_kv(text: str) -> Dict[str, str]:
    """Read a key-value document back into an ordered dict of strings"""
    lines = text.splitlines()
    if not lines or lines[0].strip() != KV_HEADER:
        raise ValueError(f"not an eqgas key-value document (expected header {KV_HEADER!r})")

    values: Dict[str, str] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith('#'):
            continue
        key, sep, value = line.partition(' = ')
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _summary_frame(section: ReportSection) -> pd.DataFrame:
    rows = []
    for name, value in section.summary.items():
        shown = format_sig(value) if isinstance(value, float) else str(value)
        rows.append({'quantity': name, 'value': shown, 'unit': section.units.get(name, '')})
    return pd.DataFrame(rows, columns=['quantity', 'value', 'unit'])


def export_to_text(doc: ReportDocument) -> str:
    """Human-readable report"""
    out = [doc.title, '=' * len(doc.title)]
    if not doc.converged:
        out.append('WARNING: solution NOT converged')
    out.extend(doc.notes)

    for section in doc.sections:
        out.append('')
        out.append(section.title)
        out.append('-' * len(section.title))
        if section.summary:
            out.append(_summary_frame(section).to_string(index=False))
        if section.table is not None:
            out.append('')
            out.append(section.table.to_string(float_format=lambda x: f"{x:.6e}"))
    return '\n'.join(out) + '\n'


def export_to_html(doc: ReportDocument) -> str:
    parts = [
        '<!DOCTYPE html>',
        '<html><head><meta charset="utf-8">',
        f'<title>{html.escape(doc.title)}</title>',
        '<style>body{font-family:sans-serif;margin:2em;color:#2c3e50}'
        'table{border-collapse:collapse;margin:0.5em 0}'
        'td,th{border:1px solid #bdc3c7;padding:2px 8px;text-align:right}'
        'h2{color:#34495e}</style>',
        '</head><body>',
        f'<h1>{html.escape(doc.title)}</h1>',
    ]
    if not doc.converged:
        parts.append('<p><strong>Solution NOT converged</strong></p>')
    for note in doc.notes:
        parts.append(f'<p>{html.escape(note)}</p>')

    for section in doc.sections:
        parts.append(f'<h2>{html.escape(section.title)}</h2>')
        if section.summary:
            parts.append(_summary_frame(section).to_html(index=False, border=0))
        if section.table is not None:
            parts.append(section.table.to_html(float_format=lambda x: f"{x:.6e}", border=0))
    parts.append('</body></html>')
    return '\n'.join(parts)


def _pdf_table(frame: pd.DataFrame, with_index: bool) -> Table:
    header = ([frame.index.name or ''] if with_index else []) + [str(c) for c in frame.columns]
    rows = [header]
    for label, row in frame.iterrows():
        cells = [format_sig(v) if isinstance(v, float) else str(v) for v in row.tolist()]
        rows.append(([str(label)] if with_index else []) + cells)
    table = Table(rows, hAlign='LEFT')
    table.setStyle(TableStyle([
        ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#34495e')),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.white),
        ('FONTSIZE', (0, 0), (-1, -1), 8),
        ('GRID', (0, 0), (-1, -1), 0.25, colors.HexColor('#bdc3c7')),
        ('ALIGN', (1, 1), (-1, -1), 'RIGHT'),
    ]))
    return table


def export_to_pdf(doc: ReportDocument) -> bytes:
    """Render the report as a PDF"""
    buffer = io.BytesIO()
    pdf = SimpleDocTemplate(buffer, pagesize=A4,
                            rightMargin=54, leftMargin=54,
                            topMargin=54, bottomMargin=36,
                            title=doc.title)

    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        'ReportTitle',
        parent=styles['Heading1'],
        fontSize=16,
        spaceAfter=12,
        alignment=1,  # Center alignment
        textColor=colors.HexColor('#2c3e50')
    )
    heading_style = ParagraphStyle(
        'ReportHeading',
        parent=styles['Heading2'],
        fontSize=12,
        spaceAfter=6,
        spaceBefore=12,
        textColor=colors.HexColor('#34495e')
    )

    elements = [Paragraph(html.escape(doc.title), title_style)]
    if not doc.converged:
        elements.append(Paragraph('<b>Solution NOT converged</b>', styles['Normal']))
    for note in doc.notes:
        elements.append(Paragraph(html.escape(note), styles['Normal']))

    for section in doc.sections:
        elements.append(Paragraph(html.escape(section.title), heading_style))
        if section.summary:
            elements.append(_pdf_table(_summary_frame(section), with_index=False))
            elements.append(Spacer(1, 6))
        if section.table is not None:
            elements.append(_pdf_table(section.table, with_index=True))

    pdf.build(elements)
    data = buffer.getvalue()
    buffer.close()
    return data


def export_to_docx(doc: ReportDocument) -> bytes:
    """Render the report as a Word document"""
    document = Document()
    document.styles['Normal'].font.name = 'Calibri'
    document.styles['Normal'].font.size = Pt(10)

    heading = document.add_heading(doc.title, 0)
    heading.alignment = WD_ALIGN_PARAGRAPH.CENTER
    if not doc.converged:
        warning = document.add_paragraph()
        warning.add_run('Solution NOT converged').bold = True
    for note in doc.notes:
        document.add_paragraph(note)

    for section in doc.sections:
        document.add_heading(section.title, level=1)
        frames = []
        if section.summary:
            frames.append((_summary_frame(section), False))
        if section.table is not None:
            frames.append((section.table, True))
        for frame, with_index in frames:
            header = ([frame.index.name or ''] if with_index else []) + [str(c) for c in frame.columns]
            table = document.add_table(rows=1, cols=len(header))
            table.style = 'Light Grid Accent 1'
            for cell, text in zip(table.rows[0].cells, header):
                cell.text = text
            for label, row in frame.iterrows():
                cells = table.add_row().cells
                values = ([str(label)] if with_index else []) + [
                    format_sig(v) if isinstance(v, float) else str(v) for v in row.tolist()
                ]
                for cell, text in zip(cells, values):
                    cell.text = text

    buffer = io.BytesIO()
    document.save(buffer)
    buffer.seek(0)
    return buffer.getvalue()


def export_report(doc: ReportDocument, export_format: str,
                  argv: Optional[Sequence[str]] = None) -> bytes:
    """Render a report in one of kv, txt, html, pdf or docx"""
    if export_format == 'kv':
        return export_to_kv(doc, argv).encode('utf-8')
    if export_format == 'txt':
        return export_to_text(doc).encode('utf-8')
    if export_format == 'html':
        return export_to_html(doc).encode('utf-8')
    if export_format == 'pdf':
        return export_to_pdf(doc)
    if export_format == 'docx':
        return export_to_docx(doc)
    raise ValueError(f"unknown export format: {export_format!r} (choose from kv, txt, html, pdf, docx)")


def bundle_exports(doc: ReportDocument, basename: str, formats: Sequence[str] = ('kv', 'html', 'pdf', 'docx'),
                   argv: Optional[Sequence[str]] = None) -> bytes:
    """Zip archive holding the report in several formats"""
    zip_buffer = io.BytesIO()
    with zipfile.ZipFile(zip_buffer, 'w', zipfile.ZIP_DEFLATED) as zip_file:
        for export_format in formats:
            zip_file.writestr(f"{basename}.{export_format}", export_report(doc, export_format, argv))
    zip_buffer.seek(0)
    return zip_buffer.getvalue()


def create_download_link(file_data: bytes, filename: str, file_type: str) -> str:
    """Create a download link for file data"""
    b64 = base64.b64encode(file_data).decode()
    mime_type = MIME_TYPES.get(file_type, 'application/octet-stream')
    return f'<a href="data:{mime_type};base64,{b64}" download="{filename}">Download {filename}</a>'


def validate_export_data(doc: ReportDocument) -> dict:
    """Check a report before export"""
    errors = []
    warnings = []

    if not doc.title:
        errors.append("Report title is required for export")
    if not doc.sections:
        errors.append("Report has no sections")

    for section in doc.sections:
        if not section.key or any(ch.isspace() or ch == '=' for ch in section.key):
            errors.append(f"Section key {section.key!r} is not usable in a key-value document")
        if section.table is not None and section.table.empty:
            warnings.append(f"Section {section.title!r} has an empty species table")
        for name, value in section.summary.items():
            if isinstance(value, float) and not np.isfinite(value):
                warnings.append(f"{section.key}.{name} is not finite")

    if not doc.converged:
        warnings.append("Solution did not converge")

    return {
        'can_export': len(errors) == 0,
        'errors': errors,
        'warnings': warnings
    }
