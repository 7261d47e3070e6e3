"""
Report emission: JSON summaries, CSV series and norm tables, binary
checkpoints and a rendered markdown/HTML run summary per job.
"""
import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import markdown
import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

import config
from jobs import ExperimentResult
from run_config import RunConfig, config_hash, dump_config
from spectral_core import write_checkpoint

logger = logging.getLogger("rich")

NORM_COLUMNS = ["norm_name", "s", "p", "r", "rho", "value"]


def jsonable(value: Any) -> Any:
    """Plain-JSON form of ``value``; non-finite floats become "nan", "inf" or "-inf"."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def format_number(value: Any) -> str:
    """CSV cell text; repr keeps floats bit-exact."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


class ReportWriter:
    """Writes every output of one run into ``out_dir``, names keyed by the config hash."""

    def __init__(self, out_dir, cfg: Optional[RunConfig] = None, template_dir: Optional[str] = None):
        self.out_dir = Path(out_dir)
        self.cfg = cfg
        self.tag = config_hash(cfg) if cfg is not None else "noconfig"
        self.env = Environment(
            loader=FileSystemLoader(template_dir or config.TEMPLATES_DIR),
            autoescape=select_autoescape(['html', 'xml']),
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.md = markdown.Markdown(extensions=['tables'])

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _open(self, path: Path, mode: str = "w"):
        try:
            return open(path, mode, encoding="utf-8", newline="")
        except OSError as e:
            raise OSError(f"cannot write report file {path}: {e}") from e

    def ensure_dir(self) -> None:
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as e:
            raise OSError(f"cannot create output directory {self.out_dir}: {e}") from e
        if not os.access(self.out_dir, os.W_OK):
            raise OSError(f"output directory {self.out_dir} is not writable")

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self._path(name)
        with self._open(path) as f:
            json.dump(jsonable(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def write_series(self, stem: str, series: Dict[str, List[float]]) -> Optional[Path]:
        if not series:
            return None
        columns = list(series)
        length = max(len(v) for v in series.values())
        path = self._path(f"{stem}_series.csv")
        with self._open(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for i in range(length):
                writer.writerow([format_number(series[c][i]) if i < len(series[c]) else "nan" for c in columns])
        return path

    def write_norms(self, stem: str, result: ExperimentResult) -> Optional[Path]:
        if not result.norms:
            return None
        path = self._path(f"{stem}_norms.csv")
        with self._open(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(NORM_COLUMNS)
            for record in result.norms:
                row = record.model_dump()
                writer.writerow([format_number(row[c]) for c in NORM_COLUMNS])
        return path

    def write_checkpoints(self, stem: str, result: ExperimentResult) -> List[Path]:
        paths = []
        for label, (fields, time) in sorted(result.checkpoints.items()):
            path = self._path(f"{stem}_{label}.bmhd")
            write_checkpoint(path, fields, time)
            paths.append(path)
        return paths

    def write_summary_docs(self, stem: str, result: ExperimentResult) -> List[Path]:
        """Markdown from the run template, then the same text converted to HTML."""
        template = self.env.get_template('run_summary.md.j2')
        text = template.render(result=result, tag=self.tag, rows=_summary_rows(result.summary),
                               config_yaml=_config_yaml(self.cfg), series_columns=list(result.series))
        md_path = self._path(f"{stem}.md")
        with self._open(md_path) as f:
            f.write(text)
        self.md.reset()
        body = self.md.convert(text)
        html = self.env.get_template('run_summary.html.j2').render(title=f"{result.name} {self.tag}", body=body)
        html_path = self._path(f"{stem}.html")
        with self._open(html_path) as f:
            f.write(html)
        return [md_path, html_path]

    def write_result(self, result: ExperimentResult) -> List[Path]:
        stem = f"{result.name}_{self.tag}"
        payload = {"name": result.name, "passed": result.passed, "config_hash": self.tag,
                   "summary": result.summary, "checkpoints": sorted(result.checkpoints)}
        paths = [self.write_json(f"{stem}.json", payload)]
        for path in (self.write_series(stem, result.series), self.write_norms(stem, result)):
            if path is not None:
                paths.append(path)
        paths += self.write_checkpoints(stem, result)
        paths += self.write_summary_docs(stem, result)
        logger.debug(f"{result.name}: wrote {len(paths)} files to {self.out_dir}")
        return paths

    def write_run_summary(self, results: Sequence[ExperimentResult]) -> Path:
        payload = {"config_hash": self.tag,
                   "jobs": [{"name": r.name, "passed": r.passed} for r in results],
                   "passed": all(r.passed for r in results)}
        return self.write_json(f"run_{self.tag}.json", payload)


def _summary_rows(summary: Dict[str, Any], prefix: str = "") -> List[Dict[str, str]]:
    """Flatten scalar entries of a nested summary into (key, value) table rows."""
    rows = []
    for key in sorted(summary):
        value = summary[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            rows += _summary_rows(value, name + ".")
        elif isinstance(value, (list, tuple)) and value and isinstance(value[0], dict):
            for i, item in enumerate(value):
                rows += _summary_rows(item, f"{name}[{i}].")
        elif isinstance(value, (list, tuple)):
            if len(value) <= 8:
                rows.append({"key": name, "value": ", ".join(format_number(v) for v in value)})
        else:
            # pipes inside estimate statements would split the markdown table cell
            rows.append({"key": name, "value": format_number(value).replace("|", "\\|")})
    return rows


def _config_yaml(cfg: Optional[RunConfig]) -> str:
    if cfg is None:
        return ""
    return dump_config(cfg)


def emit_reports(results: Sequence[ExperimentResult], out_dir, cfg: Optional[RunConfig] = None) -> List[Path]:
    """Write every result plus the run summary; returns the written paths in order."""
    writer = ReportWriter(out_dir, cfg)
    writer.ensure_dir()
    paths: List[Path] = []
    for result in results:
        paths += writer.write_result(result)
    paths.append(writer.write_run_summary(results))
    logger.info(f"wrote {len(paths)} report files to {writer.out_dir}")
    return paths
