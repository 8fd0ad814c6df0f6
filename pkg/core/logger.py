# core/logger.py

import datetime
import os

from dotenv import load_dotenv
from rich.console import Console

load_dotenv()

_LEVELS = {"debug": 10, "info": 20, "warning": 30, "error": 40}
_STYLES = {"debug": "dim", "info": "", "warning": "yellow", "error": "bold red"}

console = Console(stderr=True, highlight=False)
_quiet = False


def set_quiet(flag: bool) -> None:
    global _quiet
    _quiet = flag


def _threshold() -> int:
    name = os.getenv("BGP_LOG_LEVEL", "info").lower()
    return _LEVELS.get(name, _LEVELS["info"])


def log(stage: str, msg: str, level: str = "info") -> None:
    """Simple timestamped console logger."""
    rank = _LEVELS.get(level, _LEVELS["info"])
    if rank < _threshold():
        return
    if _quiet and rank < _LEVELS["warning"]:
        return
    now = datetime.datetime.now().strftime("%H:%M:%S")
    console.print(f"[{now}] [{stage}] {msg}", style=_STYLES.get(level, ""), markup=False)
