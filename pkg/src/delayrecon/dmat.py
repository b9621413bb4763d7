"""DMAT: a tiny bit-exact binary container for named float64 matrices.

Layout, all little-endian:
    magic  "DMAT"      4 bytes
    version u16        currently 1
    count   u16        number of sections
    per section:
        name_len u16, name UTF-8, rows u64, cols u64,
        rows*cols float64 in row-major order
"""

import struct

import numpy as np

MAGIC = b"DMAT"
VERSION = 1


class DmatError(ValueError):
    """Malformed or truncated DMAT file."""


def save_dmat(path, sections) -> None:
    """Write named 2-D float64 arrays; ``sections`` is a mapping or item list."""
    items = list(sections.items()) if hasattr(sections, "items") else list(sections)
    blobs = [MAGIC, struct.pack("<HH", VERSION, len(items))]
    for name, mat in items:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"section name too long: {name!r}")
        mat = np.ascontiguousarray(np.atleast_2d(np.asarray(mat, dtype="<f8")))
        if mat.ndim != 2:
            raise ValueError(f"section {name!r} is not a matrix")
        rows, cols = mat.shape
        blobs.append(struct.pack("<H", len(raw)))
        blobs.append(raw)
        blobs.append(struct.pack("<QQ", rows, cols))
        blobs.append(mat.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(blobs))


def load_dmat(path) -> dict:
    """Read a DMAT file back into an ordered name -> matrix dict."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 8:
        raise DmatError(f"truncated header at byte {len(buf)} (need 8 bytes)")
    if buf[:4] != MAGIC:
        raise DmatError("bad magic at byte 0")
    version, count = struct.unpack_from("<HH", buf, 4)
    if version != VERSION:
        raise DmatError(f"unsupported version {version} at byte 4")
    out = {}
    offset = 8
    for _ in range(count):
        if offset + 2 > len(buf):
            raise DmatError(f"truncated section header at byte {offset}")
        (name_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if offset + name_len + 16 > len(buf):
            raise DmatError(f"truncated section header at byte {offset}")
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        rows, cols = struct.unpack_from("<QQ", buf, offset)
        offset += 16
        nbytes = rows * cols * 8
        if offset + nbytes > len(buf):
            raise DmatError(f"truncated section data at byte {offset} (section {name!r})")
        mat = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=offset)
        out[name] = mat.reshape(rows, cols).copy()
        offset += nbytes
    if offset != len(buf):
        raise DmatError(f"trailing bytes at byte {offset}")
    return out
