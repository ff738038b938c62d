"""
Report rendering for evaluation results: an aligned table for people and
CSV lines for scripts, for single evaluations and for sweeps.
"""

from pathlib import Path
from typing import List, Sequence, Union

from src.pipeline.metrics import TASKS, EvalReport
from src.pipeline.sweep import SweepPoint
from src.utils.constants import TOP_K
from src.utils.logger_config import get_logger

logger = get_logger(__name__)


class ReportManager:
    """Formats EvalReport objects"""

    DEFAULT_STYLE = {
        'interval_width': 8,
        'column_width': 9,
        'precision': 4,
        'percent': True,
    }

    def __init__(self, style=None):
        self.style = {**self.DEFAULT_STYLE, **(style or {})}

    def _columns(self) -> List[str]:
        return [f"{task}_{kind}" for task in TASKS
                for kind in ("top1", f"top{TOP_K}", f"recall{TOP_K}")]

    def _header_label(self, report: EvalReport, column: str) -> str:
        task, kind = column.split("_", 1)
        if kind != "top1":
            kind = kind.replace(str(TOP_K), str(report.k[task]))
        return f"{task[0].upper()}.{kind}"

    def render_table(self, report: EvalReport) -> str:
        """One row per interval; values in percent unless the style says otherwise"""
        iw, cw = self.style['interval_width'], self.style['column_width']
        columns = self._columns()
        header = "tau (s)".ljust(iw) + "".join(self._header_label(report, c).rjust(cw) for c in columns)
        lines = [header, "-" * len(header)]
        scale = 100.0 if self.style['percent'] else 1.0
        digits = 2 if self.style['percent'] else self.style['precision']
        for entry in report.intervals:
            cells = "".join(f"{entry.values[c] * scale:.{digits}f}".rjust(cw) for c in columns)
            lines.append(f"{entry.interval_s:.2f}".ljust(iw) + cells)
        lines.append(f"samples: {report.sample_count}, k: " +
                     ", ".join(f"{task}={report.k[task]}" for task in TASKS))
        return "\n".join(lines)

    def csv_lines(self, report: EvalReport) -> List[str]:
        """`interval,step,metric,value` records, then one `k` line per task"""
        lines = ["interval,step,metric,value"]
        for entry in report.intervals:
            for column in self._columns():
                lines.append(f"{entry.interval_s:.9g},{entry.step},{column},{entry.values[column]:.9g}")
        for task in TASKS:
            lines.append(f"k,,{task},{report.k[task]}")
        return lines

    def write_csv(self, report: EvalReport, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.csv_lines(report)) + "\n", encoding="utf-8")
        logger.info(f"Report written to {path}")
        return path

    def render_sweep(self, points: Sequence[SweepPoint]) -> str:
        """One row per swept value"""
        cw = self.style['column_width']
        scale = 100.0 if self.style['percent'] else 1.0
        digits = 2 if self.style['percent'] else self.style['precision']
        name = points[0].key.split(".")[1] if points else "value"
        metric = f"A.top{points[0].k}" if points else "A.top"
        header = name.ljust(cw + 3) + "params".rjust(cw + 3) + "loss".rjust(cw) + metric.rjust(cw)
        lines = [header, "-" * len(header)]
        for point in points:
            lines.append(str(point.value).ljust(cw + 3) + str(point.parameters).rjust(cw + 3) +
                         f"{point.final_loss:.4f}".rjust(cw) +
                         f"{point.score * scale:.{digits}f}".rjust(cw))
        return "\n".join(lines)

    def sweep_lines(self, points: Sequence[SweepPoint]) -> List[str]:
        """`key,value,parameters,steps,final_loss,metric,score` records"""
        lines = ["key,value,parameters,steps,final_loss,metric,score"]
        for point in points:
            lines.append(f"{point.key},{point.value},{point.parameters},{point.steps},"
                         f"{point.final_loss:.9g},action_top{point.k},{point.score:.9g}")
        return lines

    def write_sweep_csv(self, points: Sequence[SweepPoint], path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.sweep_lines(points)) + "\n", encoding="utf-8")
        logger.info(f"Sweep report written to {path}")
        return path
