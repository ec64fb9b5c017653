"""Matrix files.

Two formats are supported, chosen by file extension:

* ``.csv`` -- first line is the comment ``# D,T,field``, followed by ``D``
  rows of ``T`` comma separated values. Complex rows hold ``2T`` values,
  real and imaginary parts interleaved.
* anything else -- binary: magic ``b"ISAM"``, ``u32 D``, ``u32 T``,
  ``u8 field`` (0 real, 1 complex), then little-endian ``f64`` values in row
  major order, complex entries interleaved as re/im.
"""

import struct
from pathlib import Path

import numpy as np

from .model import Field, field_of

__all__ = ["save_matrix", "load_matrix", "write_csv", "read_csv", "write_binary", "read_binary"]

MAGIC = b"ISAM"
_HEADER = struct.Struct("<4sIIB")


def _as_real_rows(x: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(x):
        return x.astype(np.complex128).view(np.float64)
    return x.astype(np.float64)


def write_csv(path, x) -> None:
    x = np.atleast_2d(np.asarray(x))
    D, T = x.shape
    with open(path, "w") as fh:
        fh.write(f"# {D},{T},{field_of(x).value}\n")
        for row in _as_real_rows(x):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '# D,T,field' header")
        try:
            D, T, field = (p.strip() for p in header[1:].split(","))
            D, T, field = int(D), int(T), Field(field)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed header {header.strip()!r}") from exc
        data = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    width = 2 * T if field is Field.COMPLEX else T
    if data.shape != (D, width):
        raise ValueError(f"{path}: header says {D}x{width} values, found {data.shape}")
    if field is Field.COMPLEX:
        return np.ascontiguousarray(data).view(np.complex128)
    return data


def write_binary(path, x) -> None:
    x = np.atleast_2d(np.asarray(x))
    D, T = x.shape
    payload = np.ascontiguousarray(_as_real_rows(x), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, D, T, field_of(x).tag))
        fh.write(payload.tobytes())


def read_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, D, T, tag = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    field = Field.from_tag(tag)
    n = D * T * (2 if field is Field.COMPLEX else 1)
    body = raw[_HEADER.size:]
    if len(body) != 8 * n:
        raise ValueError(f"{path}: expected {8 * n} payload bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if field is Field.COMPLEX:
        return data.view(np.complex128).reshape(D, T)
    return data.reshape(D, T)


def save_matrix(path, x) -> None:
    if str(path).lower().endswith(".csv"):
        write_csv(path, x)
    else:
        write_binary(path, x)


def load_matrix(path) -> np.ndarray:
    if str(path).lower().endswith(".csv"):
        return read_csv(path)
    return read_binary(path)
