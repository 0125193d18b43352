"""
RUNTIME CONFIGURATION
=====================
Environment-driven defaults. `run.py` loads a project `.env` (python-dotenv)
before this module is imported, so values set there take effect.

Env vars:
- MATCHAIN_THREADS: default worker threads for the branch-and-bound pools (default 1)
- MATCHAIN_ENUM_BUDGET: largest number of sequences complete enumeration accepts (default 1e8)
- MATCHAIN_TELEMETRY_IPC: "1" mirrors telemetry events to stderr
"""

from __future__ import annotations

import os


def env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return max(1, int(float(raw)))
    except ValueError:
        return default


DEFAULT_THREADS = env_int("MATCHAIN_THREADS", 1)
DEFAULT_ENUM_BUDGET = env_int("MATCHAIN_ENUM_BUDGET", 10**8)


def telemetry_ipc_enabled() -> bool:
    return os.environ.get("MATCHAIN_TELEMETRY_IPC") == "1"
