"""Parameter checkpoint files.

Byte layout::

    offset 0   8 bytes   magic b"LFSRCKPT"
    offset 8   8 bytes   header length L, unsigned little-endian
    offset 16  L bytes   UTF-8 JSON header (sorted keys)
    offset 16+L          parameter data, little-endian float32, concatenated

The header holds ``{"format": 1, "dtype": "<f4", "meta": {...},
"params": [{"name", "shape", "offset"}, ...]}`` where ``offset`` counts
bytes from the start of the data block.  Parameters are stored in the order
of the mapping passed to :func:`save_checkpoint`.
"""

import json
import struct

import numpy as np

from .errors import ConfigurationError

MAGIC = b"LFSRCKPT"
FORMAT = 1


def save_checkpoint(path, params, meta=None):
    entries, blobs, offset = [], [], 0
    for name, value in params.items():
        arr = np.asarray(getattr(value, "data", value), dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob = arr.tobytes(order="C")
        blobs.append(blob)
        offset += len(blob)
    header = {"format": FORMAT, "dtype": "<f4", "meta": meta or {}, "params": entries}
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Return ``(params, meta)`` with params as an ordered dict of float32 arrays."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:8] != MAGIC or len(raw) < 16:
        raise ConfigurationError(f"{path} is not an lfsr checkpoint")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: corrupt header") from exc
    if header.get("format") != FORMAT:
        raise ConfigurationError(f"{path}: unsupported checkpoint format {header.get('format')}")
    data = raw[16 + hlen:]
    params = {}
    for entry in header["params"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        if start + 4 * n > len(data):
            raise ConfigurationError(f"{path}: truncated data for {entry['name']}")
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=start)
        params[entry["name"]] = arr.reshape(entry["shape"]).astype(np.float32)
    return params, header.get("meta", {})
