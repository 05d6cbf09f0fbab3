"""Key-value array archives.

Layout of an archive file::

    PETRADARC 1\n
    <JSON header, one line>\n
    <raw little-endian payload>

The header holds ``meta`` (free-form JSON) and ``arrays``: a list of
``{"name", "dtype", "shape", "offset", "nbytes"}`` records, offsets relative
to the start of the payload. Arrays are stored C-order. Writing the same
content always yields the same bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"PETRADARC 1\n"
_DTYPES = {"<f8", "<f4", "<i8", "<i4", "|u1", "|b1"}


class ArchiveError(ValueError):
    pass


def save_archive(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    records = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        dt = a.dtype.newbyteorder("<") if a.dtype.byteorder not in "|<" else a.dtype
        a = np.ascontiguousarray(a, dtype=dt)
        if a.dtype.str not in _DTYPES:
            raise ArchiveError(f"unsupported dtype {a.dtype.str} for {name!r}")
        raw = a.tobytes(order="C")
        records.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape),
                        "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta or {}, "arrays": records}, sort_keys=True,
                        separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        for c in chunks:
            fh.write(c)


def load_archive(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ArchiveError(f"{path}: not a petrad archive")
    end = data.index(b"\n", len(MAGIC))
    try:
        header = json.loads(data[len(MAGIC):end])
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: malformed header") from exc
    payload = memoryview(data)[end + 1:]
    arrays = {}
    for rec in header["arrays"]:
        lo, n = rec["offset"], rec["nbytes"]
        if lo + n > len(payload):
            raise ArchiveError(f"{path}: truncated payload for {rec['name']!r}")
        a = np.frombuffer(payload[lo:lo + n], dtype=np.dtype(rec["dtype"]))
        arrays[rec["name"]] = a.reshape(rec["shape"]).copy()
    return arrays, header["meta"]
