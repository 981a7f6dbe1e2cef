"""File formats: binary waveforms, CSV series, and JSON reports.

Binary waveform layout (FSOW v1, little-endian):

    magic          4 bytes  b"FSOW"
    version        u16      1
    flags          u16      0
    sample_rate_hz f64
    dc_offset_v    f64      NaN when unknown
    n_samples      u64
    label_len      u16      followed by label_len bytes of UTF-8
    samples        n_samples * f32

All writers go through a temp-file-plus-rename so partially written
outputs never appear under the final name.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .fading import WaveformRecord
from .metrics import SlotMetrics
from .recovery import SymbolFrame

__all__ = [
    "write_waveform",
    "read_waveform",
    "write_frame_csv",
    "write_slots_csv",
    "write_outage_csv",
    "write_binsweep_csv",
    "write_csv",
    "write_json",
]

MAGIC = b"FSOW"
VERSION = 1
_HEADER = struct.Struct("<4sHHddQ")
_LABEL_LEN = struct.Struct("<H")


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_waveform(path, record: WaveformRecord) -> None:
    """Serialize a waveform record to the FSOW binary format."""
    dc = math.nan if record.dc_offset is None else float(record.dc_offset)
    label = record.label.encode("utf-8")
    header = _HEADER.pack(MAGIC, VERSION, 0, float(record.sample_rate_hz), dc, record.n_samples)
    payload = header + _LABEL_LEN.pack(len(label)) + label
    payload += record.samples.astype("<f4").tobytes()
    _atomic_write_bytes(Path(path), payload)


def read_waveform(path) -> WaveformRecord:
    """Parse an FSOW file, verifying magic, version, and payload length."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _LABEL_LEN.size:
        raise ValueError(f"{path}: too short to be a waveform file")
    magic, version, flags, rate, dc, n_samples = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}, expected {VERSION}")
    if flags != 0:
        raise ValueError(f"{path}: unsupported flags {flags:#x}")
    pos = _HEADER.size
    (label_len,) = _LABEL_LEN.unpack_from(raw, pos)
    pos += _LABEL_LEN.size
    label = raw[pos : pos + label_len].decode("utf-8")
    pos += label_len
    expected = n_samples * 4
    if len(raw) - pos != expected:
        raise ValueError(
            f"{path}: payload holds {len(raw) - pos} bytes but header declares "
            f"{n_samples} samples ({expected} bytes)"
        )
    samples = np.frombuffer(raw, dtype="<f4", count=n_samples, offset=pos).astype(np.float64)
    return WaveformRecord(
        samples,
        sample_rate_hz=rate,
        dc_offset=None if math.isnan(dc) else dc,
        label=label,
    )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    """Write a CSV with '.' decimals and 9-significant-digit floats."""
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    _atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode("utf-8"))


def write_frame_csv(path, frame: SymbolFrame) -> None:
    rows = zip(range(frame.n_symbols), frame.slot_index, frame.x, frame.v)
    write_csv(path, ["symbol_index", "slot_index", "x", "v"], rows)


def write_slots_csv(path, slots: list[SlotMetrics], coherence_s: float) -> None:
    rows = (
        (
            s.slot_index,
            s.slot_index * coherence_s * 1e3,
            s.mi_bob,
            s.mi_eve,
            s.rs_i,
            s.rs_i_bps,
            s.mean_voltage_bob,
            s.valid,
        )
        for s in slots
    )
    write_csv(
        path,
        ["slot_index", "t_start_ms", "mi_bob", "mi_eve", "rs_i", "rs_i_bps",
         "mean_voltage_bob", "valid"],
        rows,
    )


def write_outage_csv(path, outage: list[tuple[float, float]]) -> None:
    write_csv(path, ["r_th_bps", "probability"], outage)


def write_binsweep_csv(path, sweep: list[tuple[float, float]]) -> None:
    write_csv(path, ["delta_v", "mi_bits"], sweep)


def write_json(path, obj) -> None:
    """Deterministic JSON dump (sorted keys) via atomic replace."""
    payload = json.dumps(obj, indent=2, sort_keys=True).encode("utf-8")
    _atomic_write_bytes(Path(path), payload + b"\n")
