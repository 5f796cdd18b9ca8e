from typing import Optional, Dict, Any
import logging

from models.schemas import RunEvent
from storage import current_store

logger = logging.getLogger(__name__)


class ActivityService:
    """Service for recording run events into the log and the run report"""

    @staticmethod
    def log_activity(
        activity_type: str,
        message: str,
        level: int = logging.INFO,
        data: Optional[Dict[str, Any]] = None,
    ) -> RunEvent:
        """Log a new run event"""
        event = RunEvent(type=activity_type, message=message, data=data or {})
        logger.log(level, f"[{activity_type}] {message}")
        store = current_store()
        if store is not None:
            store.events.append(event)
        return event


# Activity Types Constants
class ActivityTypes:
    # Run lifecycle
    RUN_STARTED = "RUN_STARTED"
    RUN_FINISHED = "RUN_FINISHED"
    RUN_FAILED = "RUN_FAILED"
    CONFIG_LOADED = "CONFIG_LOADED"

    # Integration
    TRAJECTORY_COMPUTED = "TRAJECTORY_COMPUTED"
    STEP_FAILED = "STEP_FAILED"

    # Invariants
    DRIFT_EVALUATED = "DRIFT_EVALUATED"
    FIT_FALLBACK = "FIT_FALLBACK"
    CONVENTION_LOCKED = "CONVENTION_LOCKED"
    EXPECTED_FAILURE = "EXPECTED_FAILURE"

    # Reductions
    REDUCTION_MAPPED = "REDUCTION_MAPPED"
    COEFFICIENT_MISMATCH = "COEFFICIENT_MISMATCH"

    # Checks
    GRADIENT_CHECKED = "GRADIENT_CHECKED"
    CLOSURE_FOUND = "CLOSURE_FOUND"

    # Output
    FILE_WRITTEN = "FILE_WRITTEN"


# Helper functions for common events
class ActivityHelpers:

    @staticmethod
    def log_run_started(command: str, seed: int, config_path: Optional[str] = None):
        """Log the start of a command"""
        return ActivityService.log_activity(
            activity_type=ActivityTypes.RUN_STARTED,
            message=f"{command} started with seed {seed}",
            data={"command": command, "seed": seed, "config": config_path},
        )

    @staticmethod
    def log_trajectory(n_samples: int, n_steps: int, flat: bool):
        return ActivityService.log_activity(
            activity_type=ActivityTypes.TRAJECTORY_COMPUTED,
            message=f"{n_steps} {'flat' if flat else 'constrained'} steps, {n_samples} samples recorded",
            data={"n_samples": n_samples, "n_steps": n_steps},
        )

    @staticmethod
    def log_step_failed(step_index: Optional[int], detail: str):
        """Log a numerical failure inside a trajectory"""
        return ActivityService.log_activity(
            activity_type=ActivityTypes.STEP_FAILED,
            message=f"step {step_index} failed: {detail}",
            level=logging.ERROR,
            data={"step_index": step_index},
        )

    @staticmethod
    def log_drift(name: str, max_rel: float, verdict: str):
        level = logging.WARNING if verdict != "pass" else logging.INFO
        return ActivityService.log_activity(
            activity_type=ActivityTypes.DRIFT_EVALUATED,
            message=f"{name}: max relative drift {max_rel:.3e} ({verdict})",
            level=level,
            data={"generator": name, "max_rel": max_rel, "verdict": verdict},
        )

    @staticmethod
    def log_fit_fallback(name: str, printed, fitted, fitted_max_rel: float):
        """Log a refit of printed correction coefficients"""
        return ActivityService.log_activity(
            activity_type=ActivityTypes.FIT_FALLBACK,
            message=f"{name}: printed coefficients {printed} fail the bound; fitted {fitted} drift {fitted_max_rel:.3e}",
            level=logging.WARNING,
            data={"generator": name, "printed": printed, "fitted": fitted},
        )

    @staticmethod
    def log_convention(convention: Dict[str, Any]):
        return ActivityService.log_activity(
            activity_type=ActivityTypes.CONVENTION_LOCKED,
            message=f"Runge-Lenz sign sigma={convention['sigma']} for epsilon={convention['epsilon']}",
            data=dict(convention),
        )

    @staticmethod
    def log_coefficient_mismatch(ratio: float, conformal_factor: float):
        return ActivityService.log_activity(
            activity_type=ActivityTypes.COEFFICIENT_MISMATCH,
            message=f"cos image coefficient is {ratio:g} x the printed value at conformal factor {conformal_factor:g}",
            level=logging.WARNING,
            data={"ratio": ratio, "conformal_factor": conformal_factor},
        )

    @staticmethod
    def log_file_written(path: str):
        return ActivityService.log_activity(
            activity_type=ActivityTypes.FILE_WRITTEN,
            message=f"wrote {path}",
            level=logging.DEBUG,
            data={"path": path},
        )

    @staticmethod
    def log_config_loaded(config_path: Optional[str], n_terms: int, n_overrides: int):
        return ActivityService.log_activity(
            activity_type=ActivityTypes.CONFIG_LOADED,
            message=f"config {config_path or '<defaults>'}: {n_terms} potential terms, {n_overrides} overrides",
            level=logging.DEBUG,
            data={"config": config_path, "n_terms": n_terms, "n_overrides": n_overrides},
        )

    @staticmethod
    def log_expected_failure(name: str, max_rel: float, threshold: float):
        """Log a negative control whose drift cleared the failure threshold"""
        return ActivityService.log_activity(
            activity_type=ActivityTypes.EXPECTED_FAILURE,
            message=f"{name}: drift {max_rel:.3e} >= {threshold:g}, failure reproduced",
            data={"generator": name, "max_rel": max_rel, "threshold": threshold},
        )
