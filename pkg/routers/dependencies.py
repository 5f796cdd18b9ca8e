import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from models.errors import ConfigError
from models.schemas import (
    CommandName,
    ExperimentConfig,
    PhasePoint,
    PotentialKind,
    ReductionKind,
    ReductionSpec,
    RunReport,
    SystemSpec,
)
from service.activity_service import ActivityHelpers
from service.geometry_service import make_phase_point, random_flat_point, random_phase_point
from service.reduction_service import with_fiber_momentum
from service.report_service import ReportService
from settings import settings
from storage import open_store

logger = logging.getLogger(__name__)

# Flat terms singular at the origin; seeded positions keep away from it
_ORIGIN_SINGULAR = {
    PotentialKind.FLAT_KEPLER,
    PotentialKind.FLAT_COS,
    PotentialKind.MONOPOLE_CENTRIFUGAL,
}

# Used when a command runs without --config
DEFAULT_CONFIG: Dict[str, Any] = {"space": {"epsilon": 1, "d": 3, "r0": 1.0}}


class RunContext:
    """Everything a command handler needs: the validated config, its raw echo, seed and output"""

    def __init__(
        self,
        command: CommandName,
        config: ExperimentConfig,
        raw: Dict[str, Any],
        seed: int,
        out_dir: Path,
        config_path: Optional[str] = None,
    ):
        self.command = command
        self.config = config
        self.raw = raw
        self.seed = seed
        self.out_dir = out_dir
        self.config_path = config_path
        self.system: SystemSpec = config.system_spec()
        self.reporter = ReportService(out_dir, config.output.formats)
        self.report: Optional[RunReport] = None

    def new_report(self) -> RunReport:
        """Start the run report; a command failing later still reports what it recorded"""
        self.report = RunReport(command=self.command, seed=self.seed, config=self.raw)
        return self.report


# Overrides

def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: Dict[str, Any], override: str) -> Dict[str, Any]:
    """
    Set one value of a raw config document in place.

    Args:
        raw: Parsed config document
        override: "key.path=value"; integer path components index lists and
            the value is parsed as JSON, falling back to the plain string

    Returns:
        The edited document
    """
    if "=" not in override:
        raise ConfigError(f"override {override!r} is not of the form key.path=value")
    key, text = override.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override {override!r} has an empty key")

    node: Any = raw
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            if not part.lstrip("-").isdigit() or not -len(node) <= int(part) <= len(node):
                raise ConfigError(f"override {key!r}: {part!r} is not an index of a list of {len(node)}")
            idx = int(part)
            if idx == len(node):
                node.append({})
            if last:
                node[idx] = _parse_value(text)
            else:
                if node[idx] is None:
                    node[idx] = {}
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[part] = _parse_value(text)
            else:
                if node.get(part) is None:
                    node[part] = {}
                node = node[part]
        else:
            raise ConfigError(f"override {key!r}: cannot descend into a {type(node).__name__} at {part!r}")
    return raw


def load_raw_config(path: Optional[str], overrides: Sequence[str] = ()) -> Dict[str, Any]:
    """Read the JSON config (or the default one) and apply the overrides in order"""
    if path is None:
        raw = json.loads(json.dumps(DEFAULT_CONFIG))
    else:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("a config document must be a JSON object")
    for override in overrides:
        apply_override(raw, override)
    return raw


def validate_config(raw: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw document; LabErrors raised by validators pass through unchanged"""
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}")


def get_run_context(
    command: Union[CommandName, str],
    config_path: Optional[str] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
    overrides: Sequence[str] = (),
) -> RunContext:
    """
    Build the context of one command run.

    The output directory is --out, else the config's output.dir, else
    <settings.output_dir>/<command>. It is created and made the current store.
    """
    command = CommandName(command)
    raw = load_raw_config(config_path, overrides)
    config = validate_config(raw)
    run_seed = config.seed if seed is None else seed
    out_dir = out or config.output.dir or os.path.join(settings.output_dir, command.value)
    store = open_store(out_dir)
    ActivityHelpers.log_run_started(command.value, run_seed, config_path)
    ActivityHelpers.log_config_loaded(config_path, len(config.system), len(overrides))
    return RunContext(command, config, raw, run_seed, store.out_dir, config_path)


# Initial data

def _initial_seed(config: ExperimentConfig, seed: int) -> int:
    return config.initial.seed if config.initial.seed is not None else seed


def initial_state(config: ExperimentConfig, seed: int) -> Union[PhasePoint, Tuple[np.ndarray, np.ndarray]]:
    """
    Explicit or seeded initial data of the configured system.

    Returns:
        A PhasePoint on curved spaces, an (x, p) pair in flat space
    """
    system = config.system_spec()
    init = config.initial
    if not system.is_flat:
        if init.x is not None:
            return make_phase_point(system.space, np.array(init.x), np.array(init.p))
        return random_phase_point(system.space, _initial_seed(config, seed), init.momentum_scale, init.cap)

    if init.x is not None:
        return np.array(init.x, dtype=float), np.array(init.p, dtype=float)
    r_min = 0.2 * init.cap if any(t.kind in _ORIGIN_SINGULAR for t in system.terms) else 0.0
    return random_flat_point(system.dimension, _initial_seed(config, seed), init.momentum_scale, init.cap, r_min)


def oscillator_state(config: ExperimentConfig, spec: ReductionSpec, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Oscillator-side initial data; for KS the fiber momentum is set to spec.s"""
    init = config.initial
    if init.x is not None:
        u, p_u = np.array(init.x, dtype=float), np.array(init.p, dtype=float)
    else:
        u, p_u = random_flat_point(spec.oscillator_dim, _initial_seed(config, seed), init.momentum_scale, init.cap, 0.2 * init.cap)
    if not np.any(u):
        raise ConfigError("oscillator initial position must not be the origin")
    if spec.kind == ReductionKind.KS:
        p_u = with_fiber_momentum(u, p_u, spec.s)
    return u, p_u
