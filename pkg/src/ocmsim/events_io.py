"""Binary event container ("OCME") and run manifests.

Layout: magic ``OCME``, version u16, u32 JSON header length, a UTF-8 JSON
header (detector configuration, source hash, frame count, seed, counters),
then repeated little-endian records ``{frame_id u64, ix u16, iy u16,
t_bin u16}`` sorted by (frame_id, t_bin).

The manifest is a deterministic key: value text file written alongside a run;
it never contains wall-clock timestamps so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import SinkWriteError

OCME_MAGIC = b"OCME"
OCME_VERSION = 1

_RECORD = np.dtype([("frame", "<u8"), ("ix", "<u2"), ("iy", "<u2"),
                    ("t_bin", "<u2")])
_PREFIX = struct.Struct("<4sHI")


@dataclass
class EventStream:
    """Detected events plus the acquisition context they came from."""

    frame: np.ndarray            # u8 frame ids, sorted
    ix: np.ndarray               # u2 pixel column index (x)
    iy: np.ndarray               # u2 pixel row index (y)
    t_bin: np.ndarray            # u2 time bin within frame
    n_frames: int
    detector: dict = field(default_factory=dict)   # serialized DetectorConfig
    source_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.frame.size

    def is_sorted(self) -> bool:
        if len(self) < 2:
            return True
        key = self.frame.astype(np.uint64) * 65536 + self.t_bin
        return bool(np.all(np.diff(key.astype(np.int64)) >= 0))


def stable_hash(obj) -> str:
    """Deterministic SHA-256 of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_events(path, stream: EventStream) -> None:
    header = {
        "version": OCME_VERSION,
        "detector": stream.detector,
        "source_hash": stream.source_hash,
        "n_frames": int(stream.n_frames),
        "meta": stream.meta,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    records = np.empty(len(stream), dtype=_RECORD)
    records["frame"] = stream.frame
    records["ix"] = stream.ix
    records["iy"] = stream.iy
    records["t_bin"] = stream.t_bin
    try:
        with open(path, "wb") as fh:
            fh.write(_PREFIX.pack(OCME_MAGIC, OCME_VERSION, len(blob)))
            fh.write(blob)
            fh.write(records.tobytes())
    except OSError as exc:
        raise SinkWriteError(f"cannot write event file {path}: {exc}") from exc


def read_events(path) -> EventStream:
    with open(path, "rb") as fh:
        magic, version, blob_len = _PREFIX.unpack(fh.read(_PREFIX.size))
        if magic != OCME_MAGIC:
            raise ValueError(f"{path}: not an OCME event file")
        if version != OCME_VERSION:
            raise ValueError(f"{path}: unsupported OCME version {version}")
        header = json.loads(fh.read(blob_len).decode())
        records = np.frombuffer(fh.read(), dtype=_RECORD)
    return EventStream(
        frame=records["frame"].copy(), ix=records["ix"].copy(),
        iy=records["iy"].copy(), t_bin=records["t_bin"].copy(),
        n_frames=header["n_frames"], detector=header["detector"],
        source_hash=header["source_hash"], meta=header.get("meta", {}))


def write_manifest(path, entries: dict) -> None:
    """Deterministic `key: value` text file (insertion order preserved)."""
    try:
        with open(path, "w") as fh:
            for key, value in entries.items():
                fh.write(f"{key}: {value}\n")
    except OSError as exc:
        raise SinkWriteError(f"cannot write manifest {path}: {exc}") from exc


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if ":" in line:
                key, value = line.split(":", 1)
                out[key.strip()] = value.strip()
    return out
