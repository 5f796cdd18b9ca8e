import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence
import logging

import numpy as np

from models.schemas import MappedTrajectory, RunReport, Trajectory
from service.activity_service import ActivityHelpers
from storage import get_store

logger = logging.getLogger(__name__)


def format_number(value: float) -> str:
    """17 significant digits, enough to round-trip a double"""
    return f"{float(value):.17g}"


def trajectory_header(traj: Trajectory) -> List[str]:
    d = traj.X.shape[1] if traj.flat else traj.X.shape[1] - 1
    xs = [f"x{i + 1}" for i in range(d)]
    ps = [f"p{i + 1}" for i in range(d)]
    if traj.flat:
        return ["t", *xs, *ps, "H", "surface_res", "tangency_res"]
    return ["t", *xs, "x0", *ps, "p0", "H", "surface_res", "tangency_res"]


class ReportService:
    """Writes plot-ready CSV tables and the JSON run report into the current output directory"""

    def __init__(self, out_dir: Optional[Path] = None, formats: Sequence[str] = ("csv", "json")):
        self.out_dir = Path(out_dir) if out_dir is not None else get_store().out_dir
        self.formats = set(formats)

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _record(self, path: Path) -> str:
        ActivityHelpers.log_file_written(str(path))
        try:
            get_store().files.append(path.name)
        except RuntimeError:
            pass
        return str(path)

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Optional[str]:
        """Write a comma-separated table with LF line endings; floats use 17 significant digits"""
        if "csv" not in self.formats:
            return None
        path = self._path(name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
        return self._record(path)

    def write_columns(self, name: str, header: Sequence[str], columns: Sequence[np.ndarray]) -> Optional[str]:
        table = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
        return self.write_table(name, header, table)

    def write_trajectory(self, traj: Trajectory, name: str = "trajectory.csv") -> Optional[str]:
        """Write one row per recorded sample: time, position, momentum, energy and residuals"""
        columns = [
            traj.times[:, None],
            traj.X,
            traj.P,
            traj.energy[:, None],
            traj.surface_res[:, None],
            traj.tangency_res[:, None],
        ]
        return self.write_table(name, trajectory_header(traj), np.hstack(columns))

    def write_mapped(self, mapped: MappedTrajectory, name: str = "mapped.csv") -> Optional[str]:
        d = mapped.x.shape[1]
        header = [
            "s",
            "t_K",
            *[f"x{i + 1}" for i in range(d)],
            *[f"p{i + 1}" for i in range(d)],
            "H_K",
            "radius_res",
            "fiber_momentum",
        ]
        columns = [
            mapped.fictitious_time[:, None],
            mapped.kepler_time[:, None],
            mapped.x,
            mapped.p,
            mapped.kepler_energy[:, None],
            mapped.radius_residual[:, None],
            mapped.fiber_momentum[:, None],
        ]
        return self.write_table(name, header, np.hstack(columns))

    def write_report(self, report: RunReport, name: str = "report.json") -> Optional[str]:
        if "json" not in self.formats:
            return None
        path = self._path(name)
        try:
            path.write_text(report.model_dump_json(indent=2) + "\n")
        except OSError as e:
            logger.error(f"Failed to write report {path}: {e}")
            raise
        logger.info(f"Report written to {path} ({report.status}, exit {report.exit_code})")
        return self._record(path)
