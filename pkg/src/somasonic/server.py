"""Session hosting: message routing, block rendering, streaming, trial logs.

A Session is a deterministic state machine: messages are staged on arrival
and consumed only at block boundaries, so replaying a trial log through a
fresh session reproduces the audio byte for byte. The network layer (UDP
ingest for OSC peers, framed WebSocket duplex for UI clients) is a thin
asyncio shell around that core.
"""

from __future__ import annotations

import asyncio
import collections
import itertools
import json
import time
from pathlib import Path

import numpy as np

from . import osc, proximity, scene as scene_mod, synth
from .errors import ProtocolError, SomasonicError
from .proximity import Probe, VisualState

TRIAL_SCHEMA = "somasonic.trial.v1"

STATE_EVERY_N_BLOCKS = 6  # 62.5 Hz at 48 kHz / 128
_session_counter = itertools.count(1)


class TrialLogWriter:
    """Append-only JSON-lines log, flushed per record (crash-safe)."""

    def __init__(self, path, session_id: str, scene_path: str | None = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a")
        self.write(
            {
                "type": "meta",
                "schema": TRIAL_SCHEMA,
                "session": session_id,
                "scene": scene_path,
            }
        )

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_log(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{ln}: invalid JSON: {exc}") from exc
    return records


def message_records(records: list[dict]) -> list[dict]:
    """Keep replayable message records ({'t', 'address', 'args'} shape)."""
    out = []
    for r in records:
        if r.get("type") in (None, "msg") and "address" in r:
            out.append({"t": float(r.get("t", 0.0)), "address": r["address"], "args": r.get("args", [])})
    return out


class Session:
    """One scene instance with isolated audio, interaction, and log state."""

    def __init__(
        self,
        config: scene_mod.SceneConfig,
        cache_dir=None,
        seed: int = 0,
        log_path=None,
        scene_path: str | None = None,
    ):
        self.session_id = f"s{next(_session_counter):04d}"
        self.config = config
        self.structures = scene_mod.load_scene(config, cache_dir=cache_dir)
        self.meshes = {
            sid: s.mesh for sid, s in self.structures.items() if s.mesh is not None
        }
        self.voices = scene_mod.build_voices(self.structures, config)
        self.pipeline = synth.AudioPipeline(
            self.voices,
            sample_rate=config.audio.sample_rate,
            block_size=config.audio.block_size,
            seed=seed,
        )
        self.visual = VisualState()
        self.probe: Probe | None = None
        self._probe_dirty = False
        self.prox_events: list[proximity.ProximityEvent] = []
        self.error_count = 0
        self.marker_count = 0
        self._staged: list[osc.OscMessage] = []
        self.log = (
            TrialLogWriter(log_path, self.session_id, scene_path) if log_path else None
        )

    # -- timing ---------------------------------------------------------------

    @property
    def block_duration(self) -> float:
        return self.config.audio.block_size / self.config.audio.sample_rate

    @property
    def audio_time(self) -> float:
        return self.pipeline.block_index * self.block_duration

    # -- ingest -----------------------------------------------------------------

    def handle_message(self, msg: osc.OscMessage, log: bool = True) -> bool:
        """Stage a message for the next block; False if dropped as invalid."""
        try:
            osc.validate_message(msg)
        except ProtocolError:
            self.error_count += 1
            return False
        if msg.address == "/mmii/marker":
            self.marker_count += 1
        self._staged.append(msg)
        if log and self.log is not None:
            # t is the exact start time of the block that will consume the
            # message; json round-trips float64 exactly, so replay lands the
            # message on the same block.
            self.log.write(
                {
                    "type": "msg",
                    "t": self.audio_time,
                    "address": msg.address,
                    "args": list(msg.arguments),
                }
            )
        return True

    def handle_datagram(self, data: bytes) -> int:
        """Decode a UDP packet and stage its messages; returns count applied."""
        try:
            messages = osc.decode_packet(data)
        except ProtocolError:
            self.error_count += 1
            return 0
        return sum(1 for m in messages if self.handle_message(m))

    # -- block processing ----------------------------------------------------

    def _apply_staged(self) -> None:
        staged = self._staged
        self._staged = []
        for msg in staged:
            addr = msg.address
            if addr == "/mmii/probe":
                x, y, z, r = msg.arguments
                self.probe = Probe(position=(x, y, z), radius=r)
                self._probe_dirty = True
            elif addr == "/mmii/click":
                self._apply_click(*msg.arguments)
            elif addr == "/mmii/hr":
                self.pipeline.set_heart_rate(float(msg.arguments[0]))
            # marker / unmark / trial records affect only the log

        # Proximity is recomputed only when the probe actually moved; gains
        # stay latched between probe messages (latest-wins downsampling).
        if self._probe_dirty and self.probe is not None:
            self._probe_dirty = False
            self.prox_events = proximity.update_probe(
                self.meshes, self.probe, exponent=self.config.probe.gain_exponent
            )
            heard = {ev.structure_id: ev for ev in self.prox_events}
            for sid, voice in self.voices.items():
                ev = heard.get(sid)
                self.pipeline.set_gain(sid, ev.gain if ev else 0.0)
                if voice.centroid is not None:
                    pan = (voice.centroid[0] - self.probe.position[0]) / self.probe.radius
                    self.pipeline.set_pan(sid, pan)

    def _apply_click(self, name: str, vertex: int) -> None:
        if not name:
            if self.probe is None:
                return
            result = proximity.click(self.meshes, self.probe)
            if not result.hit:
                return
            name, vertex = result.structure_id, result.vertex_index
        if name not in self.voices:
            self.error_count += 1
            return
        try:
            self.voices[name].bank.input_gains(vertex)
        except SomasonicError:
            self.error_count += 1
            return
        self.pipeline.queue_event(
            synth.ExcitationEvent(structure_id=name, vertex_index=vertex, kind="impulse")
        )
        self.visual.pulse(name)

    def process_block(self) -> np.ndarray:
        """Apply staged control and render one stereo block."""
        self._apply_staged()
        self.visual.step(self.block_duration * 1e3)
        return self.pipeline.render_block()

    # -- state reporting ---------------------------------------------------------

    def state_messages(self) -> list[osc.OscMessage]:
        out = []
        for ev in self.prox_events:
            out.append(osc.prox_message(ev.structure_id, ev.distance))
            if ev.inside:
                out.append(osc.OscMessage("/mmii/inside", (ev.structure_id, 1)))
        for sid, (scale, albedo) in self.visual.snapshot().items():
            out.append(osc.OscMessage("/mmii/visual", (sid, float(scale), float(albedo))))
        return out

    def scene_snapshot(self) -> dict:
        return scene_mod.scene_snapshot(self.structures, self.config)

    def close(self) -> None:
        if self.log is not None:
            self.log.close()


# ---------------------------------------------------------------------------
# Offline replay
# ---------------------------------------------------------------------------


def replay_records(
    config: scene_mod.SceneConfig,
    records: list[dict],
    tail: float = 1.0,
    seed: int = 0,
    cache_dir=None,
) -> np.ndarray:
    """Feed logged messages at their block times; returns the stereo mix.

    Deterministic: the same records, config, and seed give bit-identical
    audio on every run.
    """
    session = Session(config, cache_dir=cache_dir, seed=seed)
    msgs = message_records(records)
    last_t = max((m["t"] for m in msgs), default=0.0)
    n_blocks = int(np.ceil((last_t + tail) / session.block_duration)) + 1
    return _replay_loop(session, msgs, n_blocks)


def _replay_loop(session: Session, msgs: list[dict], n_blocks: int) -> np.ndarray:
    dt = session.block_duration
    per_block: dict[int, list[dict]] = collections.defaultdict(list)
    for m in msgs:
        per_block[int(np.floor(m["t"] / dt + 1e-9))].append(m)
    blocks = []
    for b in range(n_blocks):
        for m in per_block.get(b, ()):
            args = tuple(
                tuple(a) if isinstance(a, list) else a for a in m["args"]
            )
            session.handle_message(osc.OscMessage(m["address"], args), log=False)
        blocks.append(session.process_block())
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# Network service
# ---------------------------------------------------------------------------


class _UdpIngest(asyncio.DatagramProtocol):
    def __init__(self, session: Session):
        self.session = session

    def datagram_received(self, data: bytes, addr) -> None:
        self.session.handle_datagram(data)


class _Client:
    """Per-connection outbound buffer: newest state wins, audio never dropped."""

    MAX_BUFFERED = 2048

    def __init__(self, ws):
        self.ws = ws
        self.frames: collections.deque[tuple[bool, bytes]] = collections.deque()
        self.kick = asyncio.Event()
        self.overflowed = False

    def push(self, frame: bytes, is_state: bool) -> None:
        if is_state:
            for i in range(len(self.frames) - 1, -1, -1):
                if self.frames[i][0]:
                    del self.frames[i]
                    break
        self.frames.append((is_state, frame))
        if len(self.frames) > self.MAX_BUFFERED:
            self.overflowed = True
        self.kick.set()

    async def sender(self) -> None:
        while True:
            await self.kick.wait()
            self.kick.clear()
            if self.overflowed:
                await self.ws.close(code=1011, reason="client too slow")
                return
            while self.frames:
                _, frame = self.frames.popleft()
                await self.ws.send(frame)


class SessionServer:
    """Single-process host: UDP OSC ingest plus framed WebSocket streaming."""

    def __init__(
        self,
        config: scene_mod.SceneConfig,
        udp_port: int = 9000,
        ws_port: int = 8765,
        host: str = "127.0.0.1",
        cache_dir=None,
        seed: int = 0,
        log_path=None,
        scene_path: str | None = None,
        realtime: bool = True,
    ):
        self.session = Session(
            config, cache_dir=cache_dir, seed=seed, log_path=log_path, scene_path=scene_path
        )
        self.udp_port = udp_port
        self.ws_port = ws_port
        self.host = host
        self.realtime = realtime
        self.clients: set[_Client] = set()
        self._stop = asyncio.Event()

    async def _handle_ws(self, ws) -> None:
        client = _Client(ws)
        self.clients.add(client)
        snapshot = json.dumps(self.session.scene_snapshot()).encode()
        await ws.send(osc.encode_frame(osc.FRAME_SCENE, snapshot))
        sender = asyncio.create_task(client.sender())
        try:
            async for raw in ws:
                if isinstance(raw, str):
                    continue
                try:
                    ftype, payload = osc.decode_frame(raw)
                    if ftype == osc.FRAME_OSC:
                        for msg in osc.decode_packet(payload):
                            self.session.handle_message(msg)
                except ProtocolError:
                    self.session.error_count += 1
        finally:
            sender.cancel()
            self.clients.discard(client)

    async def _render_loop(self) -> None:
        dt = self.session.block_duration
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            block = self.session.process_block()
            frame = osc.encode_audio_frame(self.session.pipeline.block_index - 1, block)
            state_due = (self.session.pipeline.block_index - 1) % STATE_EVERY_N_BLOCKS == 0
            state_frame = None
            if state_due:
                bundle = osc.encode_bundle(self.session.state_messages())
                state_frame = osc.encode_frame(osc.FRAME_OSC, bundle)
            for client in list(self.clients):
                client.push(frame, is_state=False)
                if state_frame is not None:
                    client.push(state_frame, is_state=True)
            if self.realtime:
                next_deadline += dt
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    # Timer overshoot or a slow block: burst to catch up
                    # (keeping long-run rate exact), but always yield so
                    # client I/O is never starved. Resync only after a
                    # catastrophic stall.
                    if delay < -0.5:
                        next_deadline = time.monotonic()
                    await asyncio.sleep(0)
            else:
                await asyncio.sleep(0)

    async def run(self) -> None:
        import websockets

        loop = asyncio.get_running_loop()
        transport, _ = await loop.create_datagram_endpoint(
            lambda: _UdpIngest(self.session), local_addr=(self.host, self.udp_port)
        )
        render = asyncio.create_task(self._render_loop())
        try:
            async with websockets.serve(self._handle_ws, self.host, self.ws_port):
                await self._stop.wait()
        finally:
            render.cancel()
            transport.close()
            self.session.close()

    def stop(self) -> None:
        self._stop.set()


def serve_forever(
    config: scene_mod.SceneConfig,
    udp_port: int,
    ws_port: int,
    host: str = "127.0.0.1",
    **kwargs,
) -> None:
    server = SessionServer(config, udp_port=udp_port, ws_port=ws_port, host=host, **kwargs)
    try:
        asyncio.run(server.run())
    except KeyboardInterrupt:
        pass
