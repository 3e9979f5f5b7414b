from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from app.core.wave_core import GridSpec, Phantom, grid_coordinates
from app.exceptions import DimensionError, ParameterError
from app.models.schemas import PhantomKind, PhantomSpec
from app.utils.logger import get_logger

logger = get_logger(__name__)


def _shape(kind: PhantomKind, x: np.ndarray, center: float, width: float) -> np.ndarray:
    distance = np.abs(x - center)
    if kind is PhantomKind.GAUSSIAN_BUMPS:
        return np.exp(-0.5 * (distance / width) ** 2)
    if kind is PhantomKind.TRIANGLE:
        if width == 0:
            return np.zeros_like(x)
        return np.clip(1.0 - distance / width, 0.0, None)
    if kind is PhantomKind.BOXCAR:
        return (distance < width).astype(float)
    raise ParameterError(f"No analytic shape for phantom kind {kind.value}")


def _read_phantom_file(path: Path, n: int) -> np.ndarray:
    """Values from a `x,value` CSV (as written by `write_phantom_csv`) or a single column."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        logger.error("phantom file unreadable", path=str(path), error=str(e))
        raise ParameterError(f"Cannot read phantom file {path}: {e}") from e

    column = "value" if "value" in frame.columns else frame.columns[-1]
    values = frame[column].to_numpy(dtype=float)
    if values.shape[0] != n:
        raise DimensionError(f"{path} holds {values.shape[0]} values, grid has {n} nodes")
    return values


def generate_phantom(spec: PhantomSpec, grid: Optional[GridSpec] = None) -> Phantom:
    """
    Deterministic test object on the interior grid.

    The first and last interior nodes are set to zero so the object has
    zero boundary traces.
    """
    grid = grid or spec.grid()
    if spec.kind is PhantomKind.FROM_FILE:
        values = _read_phantom_file(spec.path, grid.n_interior)
        label = Path(spec.path).stem
    else:
        x = grid_coordinates(grid)
        values = np.zeros(grid.n_interior)
        for center, width, amplitude in zip(spec.centers, spec.widths, spec.amplitudes):
            values += amplitude * _shape(spec.kind, x, center, width)
        label = spec.kind.value

    values[0] = 0.0
    values[-1] = 0.0
    logger.debug("phantom generated", kind=spec.kind.value, n=grid.n_interior, norm=float(np.linalg.norm(values)))
    return Phantom(values=values, label=label)


def write_phantom_csv(phantom: Phantom, grid: GridSpec, path: Union[str, Path]) -> Path:
    """Write `x,value` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"x": grid_coordinates(grid), "value": phantom.values})
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("phantom written", path=str(path), label=phantom.label)
    return path
