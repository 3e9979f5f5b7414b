import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np
from dotenv import dotenv_values
from joblib import Parallel, delayed
from pydantic import ValidationError

from app.config import Settings, get_settings
from app.core.observation import ObservationRecord, SensorArray, build_sensor_array, record_run
from app.core.reconstruction import (
    ReconstructionResult,
    bf_seek_reconstruct,
    bfn_reconstruct,
    kf_reconstruct,
    time_reversal,
)
from app.core.wave_core import GridSpec, Phantom, SchemeParams, grid_coordinates
from app.exceptions import ConfigError, ExperimentError, ReconstructionError
from app.models.schemas import ExperimentConfig, Method
from app.services.phantom_service import generate_phantom
from app.services.results_writer import CellResult, emit_results
from app.utils.logger import get_logger

logger = get_logger(__name__)

ConfigSource = Union[str, Path, Sequence[str], Mapping[str, Any], None]

CONFIG_KEYS = frozenset(ExperimentConfig.model_fields)

SWEEP_SETTINGS: tuple[dict[str, Any], ...] = (
    {"delta_data": 10, "noise_level": 0.0},
    {"delta_data": 10, "noise_level": 0.3},
    {"delta_data": 99, "noise_level": 0.0},
    {"delta_data": 99, "noise_level": 0.3},
    {"delta_data": 99, "noise_level": 0.3, "attenuation_alpha": 2.0},
    {"delta_data": 150, "noise_level": 0.0},
)
SWEEP_METHODS = (Method.TR, Method.BFN, Method.BF_SEEK, Method.KF)
SINGLE_SENSOR_VARIANT: dict[str, Any] = {"delta_data": 150, "noise_level": 0.0, "attenuation_alpha": 1.8}


def _pairs_to_dict(items: Sequence[str]) -> dict[str, str]:
    raw: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"Expected key=value, got '{item}'", key=key.strip() or None)
        raw[key.strip()] = value.strip()
    return raw


def load_config_source(source: ConfigSource) -> dict[str, Any]:
    """Raw key/value pairs from a dotenv-style file, a .json file, a mapping or `key=value` items."""
    if source is None:
        return {}
    if isinstance(source, Mapping):
        return dict(source)
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        if path.suffix == ".json":
            try:
                data = json.loads(path.read_text())
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: expected a JSON object")
            return data
        values = dotenv_values(path)
        for key, value in values.items():
            if value is None:
                raise ConfigError(f"{path}: key '{key}' has no value", key=key)
        return dict(values)
    return _pairs_to_dict(source)


def parse_config(source: ConfigSource = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Validated experiment configuration.

    Precedence: defaults < `source` < `overrides`. Empty values and None
    overrides leave the key unset.
    """
    raw = load_config_source(source)
    if overrides:
        raw.update({key: value for key, value in overrides.items() if value is not None})
    raw = {key: value for key, value in raw.items() if value != ""}

    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"Unknown configuration key: {unknown[0]}", key=unknown[0])

    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else None
        message = error["msg"]
        logger.error("invalid configuration", key=key, error=message)
        raise ConfigError(f"{key}: {message}" if key else message, key=key) from e


@dataclass
class ExperimentData:
    """Everything a method needs besides its own parameters."""

    grid: GridSpec
    params: SchemeParams
    sensors: SensorArray
    phantom: Phantom
    record: ObservationRecord


@dataclass
class ExperimentOutcome:
    cell: CellResult
    artifacts: list[Path] = field(default_factory=list)

    @property
    def result(self) -> ReconstructionResult:
        return self.cell.result


@dataclass
class SweepOutcome:
    cells: list[CellResult]
    artifacts: list[Path] = field(default_factory=list)

    def cell(self, settings: str, method: str) -> CellResult:
        for cell in self.cells:
            if cell.settings == settings and cell.method == method:
                return cell
        raise KeyError(f"No cell for {settings} / {method}")


class ExperimentService:
    """Runs reconstruction experiments and writes their artifacts."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def output_dir_for(self, config: ExperimentConfig) -> Path:
        return config.output_dir or self.settings.output_dir

    def prepare(self, config: ExperimentConfig) -> ExperimentData:
        """Phantom, truth run, sensors and (noisy) record for a configuration."""
        grid = config.grid()
        params = config.scheme()
        sensors = build_sensor_array(grid, config.delta_data, config.sensor_offset)
        phantom = generate_phantom(config.phantom_spec(), grid)
        record = record_run(phantom, grid, params, sensors, config.noise(), attenuate=config.attenuate_data)
        return ExperimentData(grid, params, sensors, phantom, record)

    def reconstruct(self, config: ExperimentConfig, data: ExperimentData) -> ReconstructionResult:
        """Run the configured method from a zero initial guess."""
        guess = Phantom(np.zeros(data.grid.n_interior), label="zero")
        truth = data.phantom.values
        common = (data.record, data.grid, data.params, data.sensors)

        if config.method is Method.TR:
            return time_reversal(*common, truth=truth)
        if config.method is Method.BFN:
            return bfn_reconstruct(*common, config.nudging(), config.control(), guess, truth=truth)
        if config.method is Method.KF:
            return kf_reconstruct(*common, config.filter_params(), guess, truth=truth)
        return bf_seek_reconstruct(*common, config.filter_params(), config.control(), guess, truth=truth)

    def run_cell(self, config: ExperimentConfig) -> CellResult:
        """Prepare and reconstruct one configuration without writing files."""
        try:
            logger.info(
                "experiment started",
                method=config.method.value,
                settings=config.settings_label,
                seed=config.seed,
            )
            data = self.prepare(config)
            result = self.reconstruct(config, data)
            logger.info(
                "experiment finished",
                method=config.method.value,
                settings=config.settings_label,
                rms_percent=result.rms_percent,
                iterations=result.iterations_used,
            )
            return CellResult(
                settings=config.settings_label,
                slug=config.settings_slug,
                method=config.method.value,
                result=result,
                x=grid_coordinates(data.grid),
                truth=data.phantom.values,
            )
        except ReconstructionError as e:
            logger.error("experiment failed", method=config.method.value, error=str(e))
            raise ExperimentError(
                f"{config.method.value} ({config.settings_label}) failed: {e}",
                config=config.model_dump(mode="json"),
            ) from e

    def run_experiment(
        self,
        config: ExperimentConfig,
        write_artifacts: bool = True,
        output_dir: Optional[Path] = None,
    ) -> ExperimentOutcome:
        cell = self.run_cell(config)
        artifacts: list[Path] = []
        if write_artifacts:
            artifacts = emit_results([cell], output_dir or self.output_dir_for(config))
        return ExperimentOutcome(cell=cell, artifacts=artifacts)

    def run_sweep(
        self,
        base: Optional[ExperimentConfig] = None,
        master_seed: int = 0,
        variants: bool = False,
        output_dir: Optional[Path] = None,
        workers: Optional[int] = None,
        write_artifacts: bool = True,
    ) -> SweepOutcome:
        """
        Every settings row against every method.

        Cells of one row share their data through the seed master_seed + row.
        Files are written once all cells are done, in row/method order.
        """
        base = base or ExperimentConfig()
        configs = sweep_configs(base, master_seed, variants)
        workers = workers or self.settings.sweep_workers
        logger.info("sweep started", cells=len(configs), workers=workers, master_seed=master_seed)

        if workers > 1:
            cells = Parallel(n_jobs=workers)(delayed(_run_cell)(config) for config in configs)
        else:
            cells = [self.run_cell(config) for config in configs]

        artifacts: list[Path] = []
        if write_artifacts:
            artifacts = emit_results(cells, output_dir or self.output_dir_for(base))
        return SweepOutcome(cells=list(cells), artifacts=artifacts)


def sweep_configs(base: ExperimentConfig, master_seed: int = 0, variants: bool = False) -> list[ExperimentConfig]:
    rows = [dict(settings) for settings in SWEEP_SETTINGS]
    methods = [SWEEP_METHODS] * len(rows)
    if variants:
        rows.append(dict(SINGLE_SENSOR_VARIANT))
        methods.append((Method.BF_SEEK,))

    base_values = base.model_dump()
    configs = []
    for row, (settings, row_methods) in enumerate(zip(rows, methods)):
        for method in row_methods:
            values = {**base_values, **settings, "method": method, "seed": master_seed + row}
            configs.append(ExperimentConfig.model_validate(values))
    return configs


def _run_cell(config: ExperimentConfig) -> CellResult:
    return ExperimentService().run_cell(config)
