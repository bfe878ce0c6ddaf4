"""Line-delimited JSON mission event log"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

DIGITS = 9


def _plain(value: Any) -> Any:
    """JSON-ready copy of ``value`` with floats rounded to a fixed precision"""

    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return round(value, DIGITS)
    return value


@dataclass
class Event:
    time: float
    kind: str
    payload: Dict[str, Any] = field(default_factory=dict)

    def to_line(self) -> str:
        record = {"t": _plain(self.time), "kind": self.kind, "payload": _plain(self.payload)}
        return json.dumps(record, sort_keys=True)

    @classmethod
    def from_line(cls, line: str) -> "Event":
        record = json.loads(line)
        return cls(record["t"], record["kind"], record.get("payload", {}))


class EventLog:
    def __init__(self, events: List[Event] = None) -> None:
        self.events: List[Event] = list(events or [])

    def record(self, time: float, kind: str, **payload) -> Event:
        event = Event(float(time), kind, payload)
        self.events.append(event)
        return event

    def of_kind(self, kind: str) -> List[Event]:
        return [e for e in self.events if e.kind == kind]

    def lines(self) -> List[str]:
        return [e.to_line() for e in self.events]

    def write(self, path) -> None:
        path = Path(path)
        path.write_text("".join(line + "\n" for line in self.lines()))
        logger.info("wrote %d events to %s", len(self.events), path)

    @classmethod
    def read(cls, path) -> "EventLog":
        with open(path) as fh:
            return cls([Event.from_line(line) for line in fh if line.strip()])

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)


def first_divergence(a: EventLog, b: EventLog) -> Optional[int]:
    """Index of the first differing serialized event, None when identical"""

    la, lb = a.lines(), b.lines()
    for k, (x, y) in enumerate(zip(la, lb)):
        if x != y:
            return k
    if len(la) != len(lb):
        return min(len(la), len(lb))
    return None
