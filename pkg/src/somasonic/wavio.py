"""Minimal WAV read/write: float32 (IEEE) and 16-bit PCM."""

from __future__ import annotations

import struct

import numpy as np


def write_wav(path, data: np.ndarray, sample_rate: int, fmt: str = "float32") -> None:
    """Write mono (n,) or multichannel (n, ch) samples in [-1, 1]."""
    data = np.asarray(data)
    if data.ndim == 1:
        data = data[:, None]
    n, channels = data.shape
    if fmt == "float32":
        payload = data.astype("<f4").tobytes()
        bits, tag = 32, 3
    elif fmt == "pcm16":
        clipped = np.clip(data, -1.0, 1.0)
        payload = (clipped * 32767.0).round().astype("<i2").tobytes()
        bits, tag = 16, 1
    else:
        raise ValueError(f"unsupported format {fmt!r}")
    block_align = channels * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        tag,
        channels,
        sample_rate,
        sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(payload),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file; returns (float64 samples (n, ch), sample_rate)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt_tag = channels = sample_rate = bits = None
    samples = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt_tag, channels, sample_rate, _, _, bits = struct.unpack_from(
                "<HHIIHH", body, 0
            )
        elif chunk_id == b"data":
            samples = body
        pos += 8 + size + (size % 2)
    if fmt_tag is None or samples is None:
        raise ValueError(f"{path}: missing fmt/data chunk")
    if fmt_tag == 3 and bits == 32:
        arr = np.frombuffer(samples, dtype="<f4").astype(np.float64)
    elif fmt_tag == 1 and bits == 16:
        arr = np.frombuffer(samples, dtype="<i2").astype(np.float64) / 32767.0
    else:
        raise ValueError(f"{path}: unsupported encoding (tag={fmt_tag}, bits={bits})")
    return arr.reshape(-1, channels), sample_rate
