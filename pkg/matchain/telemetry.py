"""
Solver Telemetry Broadcast
==========================
A process-wide singleton streaming structured events from the solvers
(node expansions, incumbent updates, completion) to any subscriber: tests use it
to audit the search, the CLI mirrors it to stderr when MATCHAIN_TELEMETRY_IPC=1.
"""

from __future__ import annotations

import json
import queue
import sys
import threading
from datetime import datetime
from typing import Any, Dict, List, Optional

from .config import telemetry_ipc_enabled


class TelemetryEmitter:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(TelemetryEmitter, cls).__new__(cls)
            cls._instance.queues = []
            cls._instance._lock = threading.Lock()
        return cls._instance

    @property
    def active(self) -> bool:
        """True when somebody listens; solvers skip building payloads otherwise."""
        return bool(self.queues) or telemetry_ipc_enabled()

    def subscribe(self) -> "queue.Queue[Dict[str, Any]]":
        q: "queue.Queue[Dict[str, Any]]" = queue.Queue()
        with self._lock:
            self.queues.append(q)
        return q

    def unsubscribe(self, q: "queue.Queue[Dict[str, Any]]") -> None:
        with self._lock:
            if q in self.queues:
                self.queues.remove(q)

    def emit(self, component: str, action: str, data: Optional[Dict[str, Any]] = None) -> None:
        """Broadcast an event to all subscribers."""
        payload = {
            "type": "solver_telemetry",
            "component": component,
            "action": action,
            "data": data or {},
            "timestamp": datetime.now().isoformat(),
        }

        if telemetry_ipc_enabled():
            try:
                print(f"__TELEMETRY__:{json.dumps(payload, default=str)}", file=sys.stderr, flush=True)
            except Exception:
                pass

        if not self.queues:
            return

        with self._lock:
            targets: List["queue.Queue[Dict[str, Any]]"] = list(self.queues)
        for q in targets:
            q.put_nowait(payload)


emitter = TelemetryEmitter()


def emit_telemetry(component: str, action: str, data: Optional[Dict[str, Any]] = None) -> None:
    """Convenience wrapper used by the solvers."""
    emitter.emit(component, action, data)


def drain(q: "queue.Queue[Dict[str, Any]]") -> List[Dict[str, Any]]:
    """Collect everything currently queued on a subscription."""
    events: List[Dict[str, Any]] = []
    while True:
        try:
            events.append(q.get_nowait())
        except queue.Empty:
            return events
