"""OSC 1.0 codec (i/f/s/b subset), schema registry, and session framing.

Every field is 4-byte aligned and big-endian per OSC 1.0. Bundles are
accepted only with the immediate timetag. The UI transport wraps each OSC
payload in a length-prefixed binary frame; audio blocks travel as separate
frames tagged with their block index. Exact layouts: docs/protocol.md.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError, TruncatedMessageError

BUNDLE_TAG = b"#bundle\x00"
IMMEDIATE_TIMETAG = b"\x00\x00\x00\x00\x00\x00\x00\x01"

FRAME_OSC = 1
FRAME_AUDIO = 2
FRAME_SCENE = 3

_FRAME_HEADER = struct.Struct(">IB")
_AUDIO_HEADER = struct.Struct(">QBH")


@dataclass(frozen=True)
class OscMessage:
    address: str
    arguments: tuple = ()

    def __post_init__(self):
        if not self.address.startswith("/"):
            raise ProtocolError(f"address must start with '/': {self.address!r}")
        object.__setattr__(self, "arguments", tuple(self.arguments))

    @property
    def type_tags(self) -> str:
        return "," + "".join(_tag_for(a) for a in self.arguments)


def _tag_for(arg) -> str:
    if isinstance(arg, bool):
        raise ProtocolError("boolean arguments are not supported")
    if isinstance(arg, (int, np.integer)):
        return "i"
    if isinstance(arg, (float, np.floating)):
        return "f"
    if isinstance(arg, str):
        return "s"
    if isinstance(arg, (bytes, bytearray)):
        return "b"
    raise ProtocolError(f"unsupported argument type {type(arg).__name__}")


def _pad4(n: int) -> int:
    return (n + 3) & ~3


def _encode_string(s: str) -> bytes:
    raw = s.encode("utf-8") + b"\x00"
    return raw + b"\x00" * (_pad4(len(raw)) - len(raw))


def _encode_blob(b: bytes) -> bytes:
    body = struct.pack(">i", len(b)) + bytes(b)
    return body + b"\x00" * (_pad4(len(body)) - len(body))


def encode_message(msg: OscMessage) -> bytes:
    out = [_encode_string(msg.address), _encode_string(msg.type_tags)]
    for arg in msg.arguments:
        tag = _tag_for(arg)
        if tag == "i":
            iv = int(arg)
            if not (-(2**31) <= iv < 2**31):
                raise ProtocolError(f"int32 overflow: {iv}")
            out.append(struct.pack(">i", iv))
        elif tag == "f":
            out.append(struct.pack(">f", float(arg)))
        elif tag == "s":
            out.append(_encode_string(arg))
        else:
            out.append(_encode_blob(bytes(arg)))
    return b"".join(out)


def encode_bundle(messages: list[OscMessage]) -> bytes:
    out = [BUNDLE_TAG, IMMEDIATE_TIMETAG]
    for m in messages:
        payload = encode_message(m)
        out.append(struct.pack(">i", len(payload)))
        out.append(payload)
    return b"".join(out)


class _Reader:
    """Cursor with hard bounds; every read is checked, never past the end."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise TruncatedMessageError(
                f"need {n} bytes at offset {self.pos}, have {self.remaining()}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def take_string(self) -> str:
        end = self.buf.find(b"\x00", self.pos)
        if end < 0:
            raise TruncatedMessageError("unterminated string")
        raw = self.buf[self.pos : end]
        advance = _pad4(end - self.pos + 1)
        if self.pos + advance > len(self.buf):
            raise TruncatedMessageError("string padding past end of buffer")
        pad = self.buf[end : self.pos + advance]
        if pad.strip(b"\x00"):
            raise ProtocolError("nonzero bytes in string padding")
        self.pos += advance
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ProtocolError(f"invalid utf-8 in string: {exc}") from exc


def decode_message(buf: bytes) -> OscMessage:
    """Inverse of encode_message over a single-message buffer."""
    if len(buf) % 4 != 0:
        raise ProtocolError(f"message length {len(buf)} not a multiple of 4")
    r = _Reader(buf)
    address = r.take_string()
    if not address.startswith("/"):
        raise ProtocolError(f"address must start with '/': {address!r}")
    tags = r.take_string()
    if not tags.startswith(","):
        raise ProtocolError(f"type tags must start with ',': {tags!r}")
    args = []
    for tag in tags[1:]:
        if tag == "i":
            args.append(struct.unpack(">i", r.take(4))[0])
        elif tag == "f":
            args.append(struct.unpack(">f", r.take(4))[0])
        elif tag == "s":
            args.append(r.take_string())
        elif tag == "b":
            (size,) = struct.unpack(">i", r.take(4))
            if size < 0:
                raise ProtocolError(f"negative blob size {size}")
            data = r.take(size)
            r.take(_pad4(size) - size)
            args.append(data)
        else:
            raise ProtocolError(f"unknown type tag {tag!r}")
    if r.remaining():
        raise ProtocolError(f"{r.remaining()} trailing bytes after message")
    return OscMessage(address, tuple(args))


def decode_packet(buf: bytes) -> list[OscMessage]:
    """Decode a datagram: one message, or a #bundle (immediate timetag only)."""
    if buf.startswith(BUNDLE_TAG):
        r = _Reader(buf)
        r.take(len(BUNDLE_TAG))
        timetag = r.take(8)
        if timetag != IMMEDIATE_TIMETAG:
            raise ProtocolError("only immediate-timetag bundles are supported")
        out: list[OscMessage] = []
        while r.remaining():
            (size,) = struct.unpack(">i", r.take(4))
            if size < 0 or size % 4 != 0:
                raise ProtocolError(f"bad bundle element size {size}")
            element = r.take(size)
            if element.startswith(BUNDLE_TAG):
                out.extend(decode_packet(element))
            else:
                out.append(decode_message(element))
        return out
    return [decode_message(buf)]


# ---------------------------------------------------------------------------
# Message schema registry
# ---------------------------------------------------------------------------

# address -> (type tags without ',', human argument names)
SCHEMAS: dict[str, tuple[str, tuple[str, ...]]] = {
    "/mmii/prox": ("sf", ("structure", "distance_m")),
    "/mmii/inside": ("si", ("structure", "flag")),
    "/mmii/click": ("si", ("structure", "vertex")),
    "/mmii/probe": ("ffff", ("x", "y", "z", "radius")),
    "/mmii/marker": ("fff", ("x", "y", "z")),
    "/mmii/unmark": ("", ()),
    "/mmii/hr": ("f", ("bpm",)),
    "/mmii/visual": ("sff", ("structure", "scale", "albedo")),
    "/mmii/trial/start": ("s", ("condition",)),
    "/mmii/trial/end": ("", ()),
}


def validate_message(msg: OscMessage) -> None:
    """Raise ProtocolError when a message does not match its schema."""
    schema = SCHEMAS.get(msg.address)
    if schema is None:
        raise ProtocolError(f"unknown address {msg.address!r}")
    tags, _names = schema
    got = msg.type_tags[1:]
    if got != tags:
        raise ProtocolError(
            f"{msg.address}: expected tags ,{tags} got ,{got}"
        )
    for a in msg.arguments:
        if isinstance(a, float) and not math.isfinite(a):
            raise ProtocolError(f"{msg.address}: non-finite float argument")
    if msg.address == "/mmii/prox" and msg.arguments[1] < 0:
        raise ProtocolError("/mmii/prox: distance must be >= 0")
    if msg.address == "/mmii/hr" and msg.arguments[0] <= 0:
        raise ProtocolError("/mmii/hr: bpm must be positive")
    if msg.address == "/mmii/probe" and msg.arguments[3] <= 0:
        raise ProtocolError("/mmii/probe: radius must be positive")


def probe_message(x: float, y: float, z: float, radius: float) -> OscMessage:
    return OscMessage("/mmii/probe", (float(x), float(y), float(z), float(radius)))


def click_message(structure: str, vertex: int) -> OscMessage:
    return OscMessage("/mmii/click", (structure, int(vertex)))


def marker_message(x: float, y: float, z: float) -> OscMessage:
    return OscMessage("/mmii/marker", (float(x), float(y), float(z)))


def prox_message(structure: str, distance: float) -> OscMessage:
    return OscMessage("/mmii/prox", (structure, float(distance)))


def heart_rate_message(bpm: float) -> OscMessage:
    return OscMessage("/mmii/hr", (float(bpm),))


# ---------------------------------------------------------------------------
# Session framing
# ---------------------------------------------------------------------------


def encode_frame(frame_type: int, payload: bytes) -> bytes:
    """[u32 length of (type byte + payload)] [u8 type] [payload]."""
    return _FRAME_HEADER.pack(len(payload) + 1, frame_type) + payload


def decode_frame(buf: bytes) -> tuple[int, bytes]:
    if len(buf) < _FRAME_HEADER.size:
        raise TruncatedMessageError("frame shorter than header")
    length, frame_type = _FRAME_HEADER.unpack_from(buf)
    if len(buf) != _FRAME_HEADER.size - 1 + length:
        raise ProtocolError(
            f"frame length mismatch: header says {length}, buffer has "
            f"{len(buf) - _FRAME_HEADER.size + 1}"
        )
    return frame_type, buf[_FRAME_HEADER.size :]


def encode_audio_frame(block_index: int, samples: np.ndarray) -> bytes:
    """Stereo float32 block tagged with its index; samples interleaved BE."""
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, channels = samples.shape
    body = _AUDIO_HEADER.pack(block_index, channels, n) + samples.astype(
        ">f4"
    ).tobytes()
    return encode_frame(FRAME_AUDIO, body)


def decode_audio_frame(payload: bytes) -> tuple[int, np.ndarray]:
    if len(payload) < _AUDIO_HEADER.size:
        raise TruncatedMessageError("audio frame shorter than header")
    block_index, channels, n = _AUDIO_HEADER.unpack_from(payload)
    need = _AUDIO_HEADER.size + 4 * channels * n
    if len(payload) != need:
        raise ProtocolError(f"audio frame length mismatch ({len(payload)} != {need})")
    data = np.frombuffer(payload, dtype=">f4", offset=_AUDIO_HEADER.size)
    return block_index, data.reshape(n, channels).astype(np.float64)
