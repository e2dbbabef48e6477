"""File formats: binary PGM images, TREGV1 raw float dumps, trace CSV.

Raw dumps are a single ASCII header line ``TREGV1 n=<n> sigma0=<v> seed=<s>``
followed by the flat little-endian float64 payload. All writers are
byte-deterministic (no timestamps; floats rendered with shortest
round-trip repr).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .sampler import RunTrace, StepRecord

TRACE_COLUMNS = ("t", "branch", "data_consistency", "dsm_loss", "null_similarity")


def write_pgm(path: str | Path, image: np.ndarray, maxval: int = 255) -> None:
    """Binary (P5) PGM; float input is clipped to [0, 1] and quantized."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {image.shape}")
    if image.dtype == np.uint8:
        data = image
    else:
        data = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Binary (P5) PGM as a uint8 grid."""
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw[pos : pos + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return data.reshape(h, w).copy()


def read_pgm_mask(path: str | Path) -> np.ndarray:
    """PGM interpreted as a binary mask: nonzero pixels are observed (1)."""
    return (read_pgm(path) > 0).astype(float)


def write_raw(path: str | Path, vec: np.ndarray, sigma0: float = 0.0, seed: int = 0) -> None:
    vec = np.asarray(vec, dtype=float).ravel()
    header = f"TREGV1 n={vec.size} sigma0={sigma0!r} seed={seed}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(vec.astype("<f8").tobytes())


def read_raw(path: str | Path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = raw[:nl].decode("ascii")
    parts = header.split()
    if not parts or parts[0] != "TREGV1":
        raise ValueError(f"{path}: missing TREGV1 header")
    meta = {}
    for item in parts[1:]:
        key, _, value = item.partition("=")
        meta[key] = value
    n = int(meta["n"])
    vec = np.frombuffer(raw[nl + 1 :], dtype="<f8")
    if vec.size != n:
        raise ValueError(f"{path}: expected {n} float64 values, found {vec.size}")
    meta["n"] = n
    meta["sigma0"] = float(meta.get("sigma0", "0"))
    meta["seed"] = int(meta.get("seed", "0"))
    return vec.copy(), meta


def trace_to_csv(trace: RunTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for r in trace.records:
        writer.writerow([r.t, r.branch, repr(r.data_consistency), repr(r.dsm_loss), repr(r.null_similarity)])
    return buf.getvalue()


def write_trace_csv(path: str | Path, trace: RunTrace) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="ascii")


def read_trace_csv(path: str | Path) -> RunTrace:
    trace = RunTrace()
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace columns {header}")
        for row in reader:
            trace.records.append(
                StepRecord(
                    t=int(row[0]),
                    branch=row[1],
                    data_consistency=float(row[2]),
                    dsm_loss=float(row[3]),
                    null_similarity=float(row[4]),
                )
            )
    return trace
