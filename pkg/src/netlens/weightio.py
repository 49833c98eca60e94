"""Bit-exact weight file I/O.

A stored model is two sibling files: a UTF-8 JSON manifest and a raw
binary blob the manifest points at. The blob is little-endian 32-bit
floats, kernel then bias per record, row-major, packed with no padding;
the manifest lists one record per conv layer in network order plus the
global fields dtype ("f32le"), CRC32 checksum of the blob (hex) and a
free-form provenance string. Round-trips are bitwise identity.
"""

import json
import os
import tempfile
import zlib

import numpy as np

from .errors import (
    BlobSizeError,
    ChecksumError,
    UnknownDtypeError,
    WeightFormatError,
)
from .network import WeightStore
from .tensor import freeze

FORMAT_TAG = "netlens-weights/1"
_DTYPE_TAG = "f32le"
_ITEM = 4  # bytes per f32le value


def write_atomic(path, data):
    """Write bytes to path via a temp file + rename (no partial files)."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".netlens-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def blob_path_for(manifest_path, manifest):
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), manifest["blob"])


def save_weights(store, net, path):
    """Serialize a weight store against a network definition.

    ``path`` names the manifest; the blob lands next to it with a .bin
    extension. Shapes are validated before anything is written.
    """
    store.validate_against(net)
    blob_name = os.path.splitext(os.path.basename(path))[0] + ".bin"
    records = []
    chunks = []
    offset = 0
    for layer in net.conv_layers():
        kernel, bias = store.entries[layer.name]
        kb = np.ascontiguousarray(kernel, dtype="<f4").tobytes()
        bb = b"" if bias is None else np.ascontiguousarray(bias, dtype="<f4").tobytes()
        length = len(kb) + len(bb)
        records.append(
            {
                "layer": layer.name,
                "kind": layer.kind,
                "kernel_shape": list(kernel.shape),
                "bias_length": 0 if bias is None else int(bias.shape[0]),
                "byte_offset": offset,
                "byte_length": length,
            }
        )
        chunks.append(kb + bb)
        offset += length
    blob = b"".join(chunks)
    manifest = {
        "format": FORMAT_TAG,
        "dtype": _DTYPE_TAG,
        "checksum_crc32": format(zlib.crc32(blob) & 0xFFFFFFFF, "08x"),
        "provenance": store.provenance,
        "blob": blob_name,
        "records": records,
    }
    write_atomic(blob_path_for(path, manifest), blob)
    write_atomic(path, (json.dumps(manifest, indent=1) + "\n").encode("utf-8"))


def _read_manifest(path):
    try:
        with open(path, "rb") as fh:
            manifest = json.loads(fh.read().decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise WeightFormatError(f"manifest is not valid UTF-8 JSON: {exc}") from exc
    for key in ("dtype", "checksum_crc32", "blob", "records"):
        if key not in manifest:
            raise WeightFormatError(f"manifest is missing the {key!r} field")
    return manifest


def load_weights(path):
    """Load a manifest + blob pair back into a WeightStore."""
    manifest = _read_manifest(path)
    if manifest["dtype"] != _DTYPE_TAG:
        raise UnknownDtypeError(
            f"unsupported dtype tag {manifest['dtype']!r} (expected {_DTYPE_TAG!r})"
        )
    with open(blob_path_for(path, manifest), "rb") as fh:
        blob = fh.read()
    expected = sum(r["byte_length"] for r in manifest["records"])
    if len(blob) != expected:
        raise BlobSizeError(
            f"blob holds {len(blob)} bytes but the manifest expects {expected}"
        )
    actual_crc = format(zlib.crc32(blob) & 0xFFFFFFFF, "08x")
    if actual_crc != manifest["checksum_crc32"]:
        raise ChecksumError(
            f"blob CRC32 {actual_crc} does not match manifest "
            f"{manifest['checksum_crc32']}"
        )
    entries = {}
    for rec in manifest["records"]:
        shape = tuple(rec["kernel_shape"])
        ksize = int(np.prod(shape)) * _ITEM
        bsize = rec["bias_length"] * _ITEM
        if ksize + bsize != rec["byte_length"]:
            raise WeightFormatError(
                f"record {rec['layer']!r}: byte_length {rec['byte_length']} does "
                f"not match kernel {ksize} + bias {bsize}"
            )
        off = rec["byte_offset"]
        kernel = np.frombuffer(blob, dtype="<f4", count=ksize // _ITEM, offset=off)
        kernel = freeze(kernel.reshape(shape).astype(np.float32, copy=True))
        bias = None
        if rec["bias_length"]:
            bias = np.frombuffer(
                blob, dtype="<f4", count=rec["bias_length"], offset=off + ksize
            )
            bias = freeze(bias.astype(np.float32, copy=True))
        entries[rec["layer"]] = (kernel, bias)
    return WeightStore(
        entries, dtype=manifest["dtype"], provenance=manifest.get("provenance", "")
    )


def inspect_weights(path):
    """Layer table for a stored model without building a network.

    Returns (rows, checksum_ok, manifest) where each row is
    (name, kind, kernel_shape, parameter_count).
    """
    manifest = _read_manifest(path)
    with open(blob_path_for(path, manifest), "rb") as fh:
        blob = fh.read()
    checksum_ok = (
        format(zlib.crc32(blob) & 0xFFFFFFFF, "08x") == manifest["checksum_crc32"]
    )
    rows = []
    for rec in manifest["records"]:
        shape = tuple(rec["kernel_shape"])
        count = int(np.prod(shape)) + rec["bias_length"]
        rows.append((rec["layer"], rec["kind"], shape, count))
    return rows, checksum_ok, manifest


def load_class_manifest(path):
    """Plain-text class manifest: line k names output channel k."""
    with open(path, "r", encoding="utf-8") as fh:
        labels = [line.rstrip("\r\n") for line in fh]
    while labels and labels[-1] == "":
        labels.pop()
    if not labels:
        raise WeightFormatError(f"class manifest {path!r} is empty")
    return tuple(labels)


def save_class_manifest(labels, path):
    write_atomic(path, ("\n".join(labels) + "\n").encode("utf-8"))
