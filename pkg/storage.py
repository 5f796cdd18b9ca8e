from pathlib import Path
from typing import List, Optional
import logging

from models.schemas import RunEvent

logger = logging.getLogger(__name__)


class RunStore:
    """Output directory of one command run and the events recorded while it runs"""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.events: List[RunEvent] = []
        self.files: List[str] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name


# Global store of the running command
store: Optional[RunStore] = None


def open_store(out_dir: str) -> RunStore:
    """Create the output directory and make it the current store"""
    global store
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    store = RunStore(path)
    logger.info(f"Writing results to {path}")
    return store


def close_store():
    """Release the current store"""
    global store
    store = None


def current_store() -> Optional[RunStore]:
    return store


def get_store() -> RunStore:
    """Get the current store"""
    if store is None:
        raise RuntimeError("Output store not open")
    return store
