"""
Event Log Preprocessing Pipeline

Turns a raw message log (``time,sender,recipients`` with recipients
separated by ';') into a single-recipient event stream:

- rows outside the requested window are dropped
- self-addressed recipients are removed; rows left without recipients are dropped
- rows with more than ``threshold`` recipients are dropped
- the remaining multi-recipient rows are split into one event per recipient,
  each with its own uniform time jitter
- times are sorted and made strictly increasing

Unparseable rows go to ``rejects.csv`` and the run continues.
"""

import json
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..inference.hidden import EventStream
from .formats import read_raw_events, write_events

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 5
DEFAULT_JITTER = 1e-5
DAY = pd.Timedelta(days=1)
EPOCH = pd.Timestamp("1970-01-01")


def parse_time(value: Union[str, float]) -> float:
    """Numeric times pass through; dates become days since 1970-01-01."""
    try:
        return float(value)
    except (TypeError, ValueError):
        stamp = pd.Timestamp(value)
        if stamp.tzinfo is not None:
            stamp = stamp.tz_convert(None)
        return float((stamp - EPOCH) / DAY)


class EventPreprocessor:
    """
    Raw message log to event stream.

    Args:
        raw_path: Raw CSV with ``time,sender,recipients``
        output_dir: Directory receiving ``events.csv``, the sidecar, ``rejects.csv``
            and ``processing_report.json``
        threshold: Largest recipient count kept
        jitter: Half-width of the uniform jitter applied to split rows
        seed: Jitter seed
        t_start: Window start (becomes time 0); earliest row by default
        t_end: Window end; one time unit after the last event by default
        min_sent: Keep only actors who sent at least this many events
        min_received: Keep only actors who received at least this many events
        verbose: Print progress banners
    """

    def __init__(self, raw_path: Union[str, Path], output_dir: Union[str, Path],
                 threshold: int = DEFAULT_THRESHOLD, jitter: float = DEFAULT_JITTER, seed: Optional[int] = None,
                 t_start: Optional[Union[str, float]] = None, t_end: Optional[Union[str, float]] = None,
                 min_sent: int = 0, min_received: int = 0, verbose: bool = False):
        if threshold < 1:
            raise ValueError("threshold must be at least 1")
        if jitter < 0:
            raise ValueError("jitter must be non-negative")
        self.raw_path = Path(raw_path)
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.threshold = int(threshold)
        self.jitter = float(jitter)
        self.seed = seed
        self.t_start = parse_time(t_start) if t_start is not None else None
        self.t_end = parse_time(t_end) if t_end is not None else None
        self.min_sent = int(min_sent)
        self.min_received = int(min_received)
        self.verbose = verbose
        self.rejects: List[Dict[str, str]] = []
        self.statistics = {
            "raw_rows": 0,
            "kept_rows": 0,
            "dropped_self": 0,
            "dropped_threshold": 0,
            "dropped_window": 0,
            "rejected": 0,
            "self_recipients_removed": 0,
            "expanded_rows": 0,
            "dropped_roster_events": 0,
            "events_written": 0,
        }

    def _say(self, message: str) -> None:
        if self.verbose:
            print(message)
        logger.info(message.strip())

    def run(self) -> EventStream:
        """Main processing pipeline."""
        self._say("=" * 80)
        self._say("Event Log Preprocessing")
        self._say("=" * 80)

        self._say("\nStep 1: Loading raw rows...")
        rows = self._load_rows()

        self._say("\nStep 2: Filtering rows...")
        kept = self._filter_rows(rows)

        self._say("\nStep 3: Splitting multi-recipient rows...")
        events = self._expand(kept)

        self._say("\nStep 4: Building the actor roster...")
        stream = self._build_stream(events)

        self._say("\nStep 5: Saving outputs...")
        self._save(stream)

        self._say("\n" + "=" * 80)
        self._say("PREPROCESSING SUMMARY")
        self._say("=" * 80)
        for key in ("raw_rows", "kept_rows", "dropped_self", "dropped_threshold", "dropped_window", "rejected",
                    "events_written"):
            self._say(f"{key}: {self.statistics[key]}")
        return stream

    def _load_rows(self) -> List[Tuple[float, str, List[str]]]:
        frame = read_raw_events(self.raw_path)
        self.statistics["raw_rows"] = len(frame)
        rows = []
        for line, record in enumerate(frame.itertuples(index=False), start=2):
            try:
                t = parse_time(record.time)
                if not np.isfinite(t):
                    raise ValueError("time is not finite")
                sender = record.sender.strip()
                recipients = [r.strip() for r in record.recipients.split(";") if r.strip()]
                if not sender or sender == "nan" or not recipients or recipients == ["nan"]:
                    raise ValueError("missing sender or recipients")
            except (ValueError, TypeError, AttributeError) as exc:
                self.rejects.append({"line": str(line), "time": str(record.time), "sender": str(record.sender),
                                     "recipients": str(record.recipients), "reason": str(exc)})
                continue
            rows.append((t, sender, recipients))
        self.statistics["rejected"] = len(self.rejects)
        self._say(f"  ✓ {len(rows)} rows parsed, {len(self.rejects)} rejected")
        return rows

    def _filter_rows(self, rows: List[Tuple[float, str, List[str]]]) -> List[Tuple[float, str, List[str]]]:
        kept = []
        for t, sender, recipients in rows:
            if (self.t_start is not None and t < self.t_start) or (self.t_end is not None and t >= self.t_end):
                self.statistics["dropped_window"] += 1
                continue
            others = [r for r in recipients if r != sender]
            self.statistics["self_recipients_removed"] += len(recipients) - len(others)
            if not others:
                self.statistics["dropped_self"] += 1
                continue
            if len(others) > self.threshold:
                self.statistics["dropped_threshold"] += 1
                continue
            kept.append((t, sender, others))
        self.statistics["kept_rows"] = len(kept)
        self._say(f"  ✓ Kept {len(kept)} rows")
        return kept

    def _expand(self, rows: List[Tuple[float, str, List[str]]]) -> List[Tuple[float, str, str]]:
        rng = np.random.default_rng(self.seed)
        events = []
        for t, sender, recipients in rows:
            if len(recipients) == 1:
                events.append((t, sender, recipients[0]))
                continue
            self.statistics["expanded_rows"] += 1
            shifts = rng.uniform(-self.jitter, self.jitter, size=len(recipients))
            events.extend((t + s, sender, r) for s, r in zip(shifts, recipients))
        self._say(f"  ✓ {len(events)} single-recipient events ({self.statistics['expanded_rows']} rows split)")
        return events

    def _roster(self, events: List[Tuple[float, str, str]]) -> List[str]:
        sent = Counter(s for _, s, _ in events)
        received = Counter(r for _, _, r in events)
        actors = sorted(set(sent) | set(received))
        if self.min_sent or self.min_received:
            actors = [a for a in actors if sent[a] >= self.min_sent and received[a] >= self.min_received]
        return actors

    def _build_stream(self, events: List[Tuple[float, str, str]]) -> EventStream:
        actors = self._roster(events)
        index = {a: k for k, a in enumerate(actors)}
        inside = [(t, index[s], index[r]) for t, s, r in events if s in index and r in index]
        self.statistics["dropped_roster_events"] = len(events) - len(inside)
        origin = self.t_start if self.t_start is not None else (min(t for t, _, _ in inside) if inside else 0.0)
        times = np.array(sorted(t - origin for t, _, _ in inside))
        if self.t_end is not None:
            t_end = self.t_end - origin
        else:
            t_end = float(times[-1]) + 1.0 if len(times) else 1.0
        order = sorted(range(len(inside)), key=lambda k: inside[k][0])
        times = strictly_increasing(np.clip(times, 0.0, np.nextafter(t_end, -np.inf)))
        if len(times) and times[-1] >= t_end:
            t_end = float(np.nextafter(times[-1], np.inf))
        ordered = [(float(times[n]), inside[k][1], inside[k][2]) for n, k in enumerate(order)]
        self.statistics["events_written"] = len(ordered)
        self.statistics["actors"] = len(actors)
        self.statistics["origin"] = origin
        self.statistics["t_end"] = t_end
        self._say(f"  ✓ {len(actors)} actors, {len(ordered)} events over [0, {t_end:g})")
        return EventStream(ordered, len(actors), t_end, actors)

    def _save(self, stream: EventStream) -> None:
        path = write_events(stream, self.output_dir / "events.csv")
        self._say(f"  ✓ Saved event stream to: {path.name}")
        pd.DataFrame(self.rejects, columns=["line", "time", "sender", "recipients", "reason"]).to_csv(
            self.output_dir / "rejects.csv", index=False)
        report = {
            "input": str(self.raw_path),
            "parameters": {"threshold": self.threshold, "jitter": self.jitter, "seed": self.seed,
                           "t_start": self.t_start, "t_end": self.t_end, "min_sent": self.min_sent,
                           "min_received": self.min_received},
            "statistics": dict(self.statistics),
            "roster": list(stream.actor_names or ()),
        }
        report_file = self.output_dir / "processing_report.json"
        with open(report_file, "w", encoding="utf-8") as f:
            json.dump(report, f, ensure_ascii=False, indent=2)
        self._say(f"  ✓ Saved processing report to: {report_file.name}")


def strictly_increasing(times: np.ndarray) -> np.ndarray:
    """Nudge sorted times upward by one ulp wherever they tie."""
    out = np.array(times, dtype=float)
    for k in range(1, len(out)):
        if out[k] <= out[k - 1]:
            out[k] = np.nextafter(out[k - 1], np.inf)
    return out
