"""
Sampler diagnostics written one JSON object per line.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import jsonlines

logger = logging.getLogger(__name__)


class DiagnosticsLog:
    """
    Append-only ``diagnostics.jsonl`` writer.

    A log without a path only forwards records to the DEBUG logger, so
    library code can always report batches.

    Args:
        path: Output file, or None
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.records = 0
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, kind: str, **fields: Any) -> Dict[str, Any]:
        record = {"kind": kind, **fields}
        logger.debug("%s", record)
        if self.path is not None:
            with jsonlines.open(self.path, mode="a") as writer:
                writer.write(record)
        self.records += 1
        return record


def read_diagnostics(path: Union[str, Path]) -> list:
    with jsonlines.open(path) as reader:
        return list(reader)
