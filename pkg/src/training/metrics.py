"""
Metrics sinks: JSON lines with a fixed key order and an optional CSV mirror.
"""

import csv
from pathlib import Path
from typing import IO, Iterator, List, Optional, Protocol, Union, runtime_checkable

from models import MetricsRecord
from utils.errors import ArtifactIOError
from utils.logging_config import get_logger

logger = get_logger(__name__)

FIELDS: List[str] = list(MetricsRecord.model_fields)


@runtime_checkable
class MetricsSink(Protocol):
    """Protocol for metric record consumers"""

    def write(self, record: MetricsRecord) -> None:
        """Append one record"""
        ...

    def close(self) -> None:
        """Flush and release resources"""
        ...


class MetricsWriter(MetricsSink):
    """Streams records to `<stem>.jsonl` and optionally `<stem>.csv`"""

    def __init__(self, jsonl_path: Union[str, Path], csv_path: Optional[Union[str, Path]] = None):
        self.jsonl_path = Path(jsonl_path)
        self.csv_path = Path(csv_path) if csv_path else None
        self._csv_stream: Optional[IO[str]] = None
        self._csv_writer = None
        try:
            self._jsonl_stream = open(self.jsonl_path, "w", encoding="utf-8", newline="\n")
            if self.csv_path:
                self._csv_stream = open(self.csv_path, "w", encoding="utf-8", newline="")
                self._csv_writer = csv.writer(self._csv_stream, lineterminator="\n")
                self._csv_writer.writerow(FIELDS)
                self._csv_stream.flush()
        except OSError as e:
            raise ArtifactIOError(f"Could not open metrics sink: {e}") from e
        self.count = 0

    def write(self, record: MetricsRecord) -> None:
        try:
            self._jsonl_stream.write(record.model_dump_json() + "\n")
            self._jsonl_stream.flush()
            if self._csv_writer is not None:
                row = record.model_dump(mode="json")
                self._csv_writer.writerow(["" if row[k] is None else row[k] for k in FIELDS])
                self._csv_stream.flush()
        except OSError as e:
            raise ArtifactIOError(f"Could not write metrics record: {e}") from e
        self.count += 1

    def close(self) -> None:
        for stream in (self._jsonl_stream, self._csv_stream):
            if stream is not None and not stream.closed:
                stream.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_metrics(record: MetricsRecord, sink: MetricsSink) -> None:
    """
    Append one record to any sink. A `MetricsWriter` writes it as a JSON line
    (and CSV row when mirrored), flushing immediately.

    Raises:
        ArtifactIOError: on any I/O failure of a file-backed sink
    """
    sink.write(record)


def read_metrics(path: Union[str, Path]) -> Iterator[MetricsRecord]:
    """Stream records back from a JSON-lines metrics file"""
    try:
        with open(path, "r", encoding="utf-8") as stream:
            for line in stream:
                if line.strip():
                    yield MetricsRecord.model_validate_json(line)
    except OSError as e:
        raise ArtifactIOError(f"Could not read metrics {path}: {e}") from e
