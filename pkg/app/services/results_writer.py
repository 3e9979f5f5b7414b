"""
CSV artifacts of a set of reconstructions.

    summary.csv               settings,method,rms_percent,iterations
    profile_<method>.csv      x,truth,estimate
    convergence_<method>.csv  iteration,rms_percent

Per-cell files go to <output_dir>/<settings-slug>/ when the results span
more than one settings row.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from app.core.reconstruction import ReconstructionResult
from app.exceptions import ExperimentError, ParameterError
from app.utils.logger import get_logger

logger = get_logger(__name__)

SUMMARY_COLUMNS = ["settings", "method", "rms_percent", "iterations"]
FLOAT_FORMAT = "%.10g"


@dataclass
class CellResult:
    """One (settings, method) cell with what is needed to plot it."""

    settings: str
    slug: str
    method: str
    result: ReconstructionResult
    x: np.ndarray
    truth: np.ndarray


def _write(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        logger.error("artifact write failed", path=str(path), error=str(e))
        raise ExperimentError(f"Cannot write {path}: {e}") from e
    return path


def summary_frame(cells: Sequence[CellResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "settings": cell.settings,
                "method": cell.method,
                "rms_percent": cell.result.rms_percent,
                "iterations": cell.result.iterations_used,
            }
            for cell in cells
        ],
        columns=SUMMARY_COLUMNS,
    )


def emit_results(cells: Sequence[CellResult], output_dir: Union[str, Path]) -> list[Path]:
    """Write the summary and per-cell files in the order of `cells`."""
    if not cells:
        raise ParameterError("No results to write")

    output_dir = Path(output_dir)
    nested = len({cell.slug for cell in cells}) > 1
    paths = [_write(summary_frame(cells), output_dir / "summary.csv")]

    for cell in cells:
        target = output_dir / cell.slug if nested else output_dir
        profile = pd.DataFrame({"x": cell.x, "truth": cell.truth, "estimate": cell.result.estimate})
        history = pd.DataFrame(
            {
                "iteration": np.arange(1, len(cell.result.per_iteration_rms) + 1),
                "rms_percent": cell.result.per_iteration_rms,
            }
        )
        paths.append(_write(profile, target / f"profile_{cell.method}.csv"))
        paths.append(_write(history, target / f"convergence_{cell.method}.csv"))

    logger.info("results written", output_dir=str(output_dir), cells=len(cells), files=len(paths))
    return paths
