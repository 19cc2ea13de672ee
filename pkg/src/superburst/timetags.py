"""Time-tag records and the ``#timetag-v1`` interchange file.

File layout::

    #timetag-v1 bin_origin_ns=<float>
    repetition,channel,time_ns
    ...

Rows carry no column header. ``time_ns`` is measured from the per-repetition
trigger; ``bin_origin_ns`` is the trigger-relative time the analysis treats as
t = 0 (end of the excitation). Rows are sorted by (repetition, time_ns).
"""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

MAGIC = "#timetag-v1"


class TimeTagFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass
class TimeTagData:
    """Columnar set of detection records from ``n_repetitions`` triggers.

    ``fixed_nph`` is generator metadata: the photon number emitted in every
    repetition when it is the same for all of them, else ``None``. It is not
    part of the file format.
    """

    repetition: np.ndarray
    channel: np.ndarray
    time_ns: np.ndarray
    n_repetitions: int
    bin_origin_ns: float = 0.0
    fixed_nph: int | None = None

    def __post_init__(self):
        self.repetition = np.asarray(self.repetition, dtype=np.int64)
        self.channel = np.asarray(self.channel, dtype=np.int8)
        self.time_ns = np.asarray(self.time_ns, dtype=float)
        if not (self.repetition.shape == self.channel.shape == self.time_ns.shape):
            raise ValueError("record columns must have equal length")
        if self.repetition.size and self.repetition.max() >= self.n_repetitions:
            raise ValueError("repetition id exceeds n_repetitions")

    def __len__(self) -> int:
        return self.time_ns.size

    @classmethod
    def empty(cls, n_repetitions: int = 0, bin_origin_ns: float = 0.0) -> TimeTagData:
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), n_repetitions, bin_origin_ns)

    def sorted(self) -> TimeTagData:
        order = np.lexsort((self.time_ns, self.repetition))
        return replace(self, repetition=self.repetition[order],
                       channel=self.channel[order], time_ns=self.time_ns[order])

    def select(self, mask) -> TimeTagData:
        return replace(self, repetition=self.repetition[mask],
                       channel=self.channel[mask], time_ns=self.time_ns[mask])

    def swap_channels(self) -> TimeTagData:
        return replace(self, channel=(3 - self.channel).astype(np.int8))

    def thin(self, keep_probability: float, rng) -> TimeTagData:
        """Drop each click independently with probability ``1 - keep_probability``."""
        return self.select(rng.random(len(self)) < keep_probability)

    def counts_per_channel(self) -> tuple[int, int]:
        return int(np.sum(self.channel == 1)), int(np.sum(self.channel == 2))


def format_timetags(data: TimeTagData) -> str:
    lines = [f"{MAGIC} bin_origin_ns={data.bin_origin_ns:.6f}"]
    lines.extend(f"{r},{c},{t:.6f}"
                 for r, c, t in zip(data.repetition.tolist(), data.channel.tolist(),
                                    data.time_ns.tolist()))
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file and rename, so readers never see a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_timetags(path, data: TimeTagData) -> None:
    atomic_write_text(path, format_timetags(data.sorted()))


def _parse_header(line: str) -> dict[str, float]:
    parts = line.split()
    if not parts or parts[0] != MAGIC:
        raise TimeTagFormatError(f"expected '{MAGIC}' header, got {line[:40]!r}", 1)
    meta = {}
    for item in parts[1:]:
        key, sep, value = item.partition("=")
        if not sep:
            raise TimeTagFormatError(f"malformed header field {item!r}", 1)
        try:
            meta[key] = float(value)
        except ValueError:
            raise TimeTagFormatError(f"non-numeric header value {item!r}", 1) from None
    if "bin_origin_ns" not in meta:
        raise TimeTagFormatError("header lacks bin_origin_ns", 1)
    return meta


def parse_timetags(text: str, n_repetitions: int | None = None) -> TimeTagData:
    """Validate and parse ``#timetag-v1`` content.

    The repetition count is inferred as ``max(repetition) + 1`` unless given;
    trailing repetitions without any click are invisible in the file.
    """
    lines = text.splitlines()
    if not lines:
        raise TimeTagFormatError("empty file (no header)", 1)
    meta = _parse_header(lines[0])
    reps, chans, times = [], [], []
    prev = (-1, -np.inf)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise TimeTagFormatError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            rep, ch, t = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError:
            raise TimeTagFormatError(f"unparseable record {line!r}", lineno) from None
        if rep < 0:
            raise TimeTagFormatError(f"negative repetition {rep}", lineno)
        if ch not in (1, 2):
            raise TimeTagFormatError(f"unknown channel {ch}", lineno)
        if not np.isfinite(t) or t < 0:
            raise TimeTagFormatError(f"invalid time {fields[2]!r}", lineno)
        if (rep, t) < prev:
            raise TimeTagFormatError("records not sorted by (repetition, time)", lineno)
        prev = (rep, t)
        reps.append(rep)
        chans.append(ch)
        times.append(t)
    inferred = reps[-1] + 1 if reps else 0
    if n_repetitions is None:
        n_repetitions = inferred
    elif n_repetitions < inferred:
        raise TimeTagFormatError(
            f"n_repetitions={n_repetitions} but file contains repetition {inferred - 1}")
    return TimeTagData(np.array(reps, dtype=np.int64), np.array(chans, dtype=np.int8),
                       np.array(times, dtype=float), n_repetitions, meta["bin_origin_ns"])


def read_timetags(path, n_repetitions: int | None = None) -> TimeTagData:
    return parse_timetags(Path(path).read_text(), n_repetitions)
