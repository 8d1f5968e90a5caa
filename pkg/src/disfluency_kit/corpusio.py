"""Line-delimited corpus I/O, content digests, and run manifests.

Corpora are one JSON document per line. Processing is per-utterance and
order-preserving: with multiple workers, results are merged back in input
order, so output bytes are identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .annotation import UtteranceRecord, parse_record


def read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def iter_records(path) -> Iterator[UtteranceRecord]:
    """Stream records from a JSONL corpus, tagging errors with path:line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield parse_record(line)
            except ValueError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None


def write_lines(path, lines: Iterable[str]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
            count += 1
    return count


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def map_ordered(fn: Callable[[str], str], items: Iterable[str], workers: int = 1) -> Iterator[str]:
    """Apply fn per item, preserving input order regardless of worker count."""
    if workers <= 1:
        yield from map(fn, items)
        return
    with Pool(workers) as pool:
        yield from pool.imap(fn, items, chunksize=16)


@dataclass
class RunManifest:
    """Reproducibility sidecar written next to every output artifact."""

    command: list[str]
    tool_version: str
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        doc = {
            "command": self.command,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


class Stopwatch:
    def __init__(self):
        self.t0 = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.t0
