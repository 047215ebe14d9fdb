"""Real-time modal audio rendering.

Each structure owns a bank of two-pole resonators (one per retained mode,
impulse-invariant discretization, so the digital impulse response is the
exactly sampled damped sinusoid). Pulsatile structures add a granular
source paced by heart rate whose grains can drive the resonator bank.

Rendering is block-based and allocation-light after construction; control
changes are applied only at block boundaries by the owner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SomasonicError
from .geometry import TriMesh
from .modal import ModalModel

DEFAULT_SAMPLE_RATE = 48000
DEFAULT_BLOCK_SIZE = 128
DEFAULT_TARGET_DBFS = -12.0

SUSTAIN_NOISE_AMP = 0.05


@dataclass(frozen=True)
class ExcitationEvent:
    """One force application, timed by sample offset within a block."""

    structure_id: str
    vertex_index: int
    kind: str  # impulse | sustained_start | sustained_stop
    force: float = 1.0
    offset: int = 0


class ResonatorBank:
    """Per-mode two-pole resonators with vertex excitation and pickup.

    State is one complex rotator per mode. Any input entering at sample n
    (impulse or drive stream) is folded into the state before that sample's
    pole rotation, so both render paths share exact semantics:

        z[n] = p * (z[n-1] + g_in * x[n]),   y[n] = sum(g_out * Im(z[n]))
    """

    def __init__(
        self,
        model: ModalModel,
        mesh: TriMesh | None = None,
        excite_vertex: int = 0,
        pickup_vertex: int | None = None,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        block_size: int = DEFAULT_BLOCK_SIZE,
        target_dbfs: float | None = DEFAULT_TARGET_DBFS,
        spectral_tilt_db_oct: float = 0.0,
        invert_gains: bool = False,
    ):
        self.model = model
        self.mesh = mesh
        self.sample_rate = sample_rate
        self.block_size = block_size
        self.excite_vertex = excite_vertex
        self.pickup_vertex = excite_vertex if pickup_vertex is None else pickup_vertex
        self._normals = mesh.vertex_normals() if mesh is not None else None

        t = 1.0 / sample_rate
        omega = model.frequencies
        zeta = model.damping_ratios
        omega_d = omega * np.sqrt(1.0 - zeta**2)
        audible = omega_d * t < np.pi  # drop modes at/above Nyquist
        self.dropped_modes = int((~audible).sum())
        omega, zeta, omega_d = omega[audible], zeta[audible], omega_d[audible]
        self._mode_index = np.nonzero(audible)[0]
        if len(omega) == 0:
            raise SomasonicError("no mode below Nyquist; check pitch mapping")

        r = np.exp(-zeta * omega * t)
        self.poles = r * np.exp(1j * omega_d * t)
        if np.any(np.abs(self.poles) >= 1.0):
            raise SomasonicError("unstable resonator pole")

        self.out_gains = self._gains_at(self.pickup_vertex)
        if invert_gains:
            # Experimental remapping: pickup emphasis mirrored across modes.
            self.out_gains = self.out_gains[::-1].copy()
        if spectral_tilt_db_oct != 0.0 and len(omega) > 1:
            octaves = np.log2(omega / omega[0])
            self.out_gains = self.out_gains * 10.0 ** (
                spectral_tilt_db_oct * octaves / 20.0
            )
        self._in_cache: dict[int, np.ndarray] = {}
        self.state = np.zeros(len(self.poles), dtype=np.complex128)

        # Powers p^0..p^B precomputed once; a decay block is one matvec.
        ks = np.arange(block_size + 1)
        self._pow = self.poles[:, None] ** ks[None, :]

        self.master_gain = 1.0
        if target_dbfs is not None:
            peak = self._impulse_peak()
            if peak > 0:
                self.master_gain = 10.0 ** (target_dbfs / 20.0) / peak

    # -- gains ---------------------------------------------------------------

    def _gains_at(self, vertex: int) -> np.ndarray:
        direction = None
        if self.model.dof_per_vertex == 3:
            if self._normals is None:
                raise SomasonicError("mesh required for shell-model banks")
            direction = self._normals[vertex]
        g = self.model.vertex_gains(vertex, direction)
        return g[self._mode_index]

    def input_gains(self, vertex: int) -> np.ndarray:
        if vertex not in self._in_cache:
            n_verts = (
                len(self.mesh.vertices)
                if self.mesh is not None
                else self.model.mode_shapes.shape[0] // self.model.dof_per_vertex
            )
            if not (0 <= vertex < n_verts):
                raise SomasonicError(f"vertex index {vertex} out of range")
            self._in_cache[vertex] = self._gains_at(vertex)
        return self._in_cache[vertex]

    def _impulse_peak(self, duration_s: float = 1.0) -> float:
        """Peak |response| to a unit impulse at the default excite vertex."""
        b = self.block_size
        z = self.input_gains(self.excite_vertex).astype(np.complex128)
        w = self.out_gains
        peak = 0.0
        n_blocks = max(1, int(duration_s * self.sample_rate) // b)
        for _ in range(n_blocks):
            seg = np.imag((w * z) @ self._pow[:, 1 : b + 1])
            peak = max(peak, float(np.max(np.abs(seg))))
            z = z * self._pow[:, b]
        return peak

    # -- rendering -------------------------------------------------------------

    def reset(self) -> None:
        self.state[:] = 0.0

    def render(
        self,
        impulses: list[tuple[int, int, float]] | None = None,
        drive: np.ndarray | None = None,
        drive_vertex: int | None = None,
    ) -> np.ndarray:
        """Render one block; returns (block_size,) float64.

        ``impulses`` are (offset, vertex, force) applied within the block;
        ``drive`` is an optional per-sample force stream applied at
        ``drive_vertex`` (defaults to the configured excite vertex).
        """
        b = self.block_size
        imp = sorted(
            (min(max(int(o), 0), b - 1), v, f) for (o, v, f) in (impulses or [])
        )
        out = np.empty(b)
        if drive is None:
            self._render_decay(out, imp)
        else:
            self._render_driven(out, imp, drive, drive_vertex)
        return out * self.master_gain

    def _render_decay(self, out: np.ndarray, imp: list[tuple[int, int, float]]):
        b = self.block_size
        w = self.out_gains
        z = self.state
        pos = 0
        for off, vertex, force in imp + [(b, -1, 0.0)]:
            seg = off - pos
            if seg > 0:
                out[pos:off] = np.imag((w * z) @ self._pow[:, 1 : seg + 1])
                z = z * self._pow[:, seg]
                pos = off
            if vertex >= 0:
                z = z + self.input_gains(vertex) * force
        self.state = z

    def _render_driven(
        self,
        out: np.ndarray,
        imp: list[tuple[int, int, float]],
        drive: np.ndarray,
        drive_vertex: int | None,
    ):
        gv = self.input_gains(
            self.excite_vertex if drive_vertex is None else drive_vertex
        )
        w = self.out_gains
        z = self.state
        p = self.poles
        j = 0
        for n in range(self.block_size):
            x = z + gv * drive[n]
            while j < len(imp) and imp[j][0] == n:
                x = x + self.input_gains(imp[j][1]) * imp[j][2]
                j += 1
            z = p * x
            out[n] = np.imag(w @ z)
        self.state = z


# ---------------------------------------------------------------------------
# Granular vessel source
# ---------------------------------------------------------------------------


def korotkoff_pulse(sample_rate: int = DEFAULT_SAMPLE_RATE, duration: float = 0.3) -> np.ndarray:
    """Bundled synthetic pulse: a band-limited 60-120 Hz thump.

    Stands in for a recorded arterial sample; real recordings are drop-in
    via any mono WAV.
    """
    t = np.arange(int(duration * sample_rate)) / sample_rate
    env = np.exp(-t / 0.045)
    body = (
        np.sin(2 * np.pi * 72.0 * t)
        + 0.55 * np.sin(2 * np.pi * 96.0 * t + 0.7)
        + 0.3 * np.sin(2 * np.pi * 118.0 * t + 1.9)
    )
    attack = np.minimum(t / 0.004, 1.0)
    x = env * attack * body
    return (x / np.max(np.abs(x))).astype(np.float64)


class GranularSource:
    """Heartbeat-paced grain scheduler over a source sample.

    Each pulse spawns a burst of Hann-windowed grains whose source offsets
    are drawn from the supplied RNG; burst timing itself is deterministic,
    so pulse spacing is exact to sample quantization.
    """

    def __init__(
        self,
        sample: np.ndarray,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        grain_duration_ms: float = 40.0,
        heart_rate_bpm: float = 60.0,
        engaged: bool = True,
        grains_per_burst: int = 5,
        amplitude: float = 0.8,
    ):
        sample = np.asarray(sample, dtype=np.float64).ravel()
        if sample.size == 0:
            raise SomasonicError("granular source sample is empty")
        if not (10.0 <= grain_duration_ms <= 100.0):
            raise SomasonicError("grain duration must lie in [10, 100] ms")
        if heart_rate_bpm <= 0:
            raise SomasonicError("heart rate must be positive")
        self.sample = sample
        self.sample_rate = sample_rate
        self.grain_duration_ms = grain_duration_ms
        self.engaged = engaged
        self.grains_per_burst = grains_per_burst
        self.amplitude = amplitude
        self._grain_len = max(8, int(round(grain_duration_ms * 1e-3 * sample_rate)))
        if self._grain_len > len(sample):
            self._grain_len = len(sample)
        self._window = np.hanning(self._grain_len)
        self._heart_rate = heart_rate_bpm
        self._next_pulse = 0.0  # absolute sample position, float accumulator
        self._active: list[tuple[int, int, float]] = []  # (start, src_off, gain)
        self.pulse_history: list[int] = []  # spawned burst sample positions

    @property
    def heart_rate(self) -> float:
        return self._heart_rate

    def set_heart_rate(self, bpm: float) -> None:
        if bpm <= 0:
            raise SomasonicError("heart rate must be positive")
        self._heart_rate = bpm

    @property
    def pulse_period_samples(self) -> float:
        return self.sample_rate * 60.0 / self._heart_rate

    def stream(self, block_start: int, block_len: int, rng: np.random.Generator) -> np.ndarray:
        """Grains rendered into [block_start, block_start + block_len)."""
        out = np.zeros(block_len)
        end = block_start + block_len
        while self._next_pulse < end:
            pulse = int(round(self._next_pulse))
            if pulse >= block_start:
                self._spawn_burst(pulse, rng)
            self._next_pulse += self.pulse_period_samples
        still = []
        gl = self._grain_len
        for start, src, gain in self._active:
            lo = max(start, block_start)
            hi = min(start + gl, end)
            if hi > lo:
                gi = lo - start
                seg = self.sample[src + gi : src + gi + (hi - lo)]
                out[lo - block_start : hi - block_start] += (
                    gain * seg * self._window[gi : gi + (hi - lo)]
                )
            if start + gl > end:
                still.append((start, src, gain))
        self._active = still
        return out

    def _spawn_burst(self, pulse_sample: int, rng: np.random.Generator) -> None:
        self.pulse_history.append(pulse_sample)
        gl = self._grain_len
        max_src = max(1, len(self.sample) - gl)
        stagger = max(1, gl // 3)
        for g in range(self.grains_per_burst):
            src = int(rng.integers(0, max_src))
            gain = self.amplitude * (0.5 + 0.5 * float(rng.random())) / self.grains_per_burst
            self._active.append((pulse_sample + g * stagger, src, gain))


# ---------------------------------------------------------------------------
# Scene mixer
# ---------------------------------------------------------------------------


@dataclass
class Voice:
    """One structure's audio state inside the pipeline."""

    bank: ResonatorBank
    gain: float = 0.0
    prev_gain: float = 0.0
    pan: float = 0.0  # -1 left .. +1 right
    sustained: bool = False
    granular: GranularSource | None = None
    centroid: np.ndarray | None = None


def soft_clip(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


class AudioPipeline:
    """Deterministic block mixer over all structures of one scene.

    Owns the only RNG in the audio path; given the same construction
    arguments, control sequence, and seed, output blocks are bit-identical.
    """

    def __init__(
        self,
        voices: dict[str, Voice],
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        block_size: int = DEFAULT_BLOCK_SIZE,
        seed: int = 0,
        clip: bool = True,
    ):
        self.voices = voices
        self.sample_rate = sample_rate
        self.block_size = block_size
        self.clip = clip
        self.rng = np.random.default_rng(seed)
        self.block_index = 0
        self.overload_count = 0
        self._pending: list[ExcitationEvent] = []

    # -- control (owner applies these only between blocks) --------------------

    def set_gain(self, structure_id: str, gain: float) -> None:
        self.voices[structure_id].gain = float(np.clip(gain, 0.0, 1.0))

    def set_pan(self, structure_id: str, pan: float) -> None:
        self.voices[structure_id].pan = float(np.clip(pan, -1.0, 1.0))

    def queue_event(self, ev: ExcitationEvent) -> None:
        if ev.structure_id not in self.voices:
            raise SomasonicError(f"unknown structure {ev.structure_id!r}")
        self._pending.append(ev)

    def set_heart_rate(self, bpm: float) -> None:
        for v in self.voices.values():
            if v.granular is not None:
                v.granular.set_heart_rate(bpm)

    def set_engaged(self, structure_id: str, engaged: bool) -> None:
        g = self.voices[structure_id].granular
        if g is not None:
            g.engaged = engaged

    # -- rendering ---------------------------------------------------------------

    def render_block(self) -> np.ndarray:
        """One stereo block (block_size, 2), float64; in [-1, 1] when clipping."""
        b = self.block_size
        events = self._pending
        self._pending = []
        left = np.zeros(b)
        right = np.zeros(b)
        start = self.block_index * b

        for sid, voice in self.voices.items():
            impulses = []
            for ev in events:
                if ev.structure_id != sid:
                    continue
                if ev.kind == "impulse":
                    impulses.append((int(ev.offset), ev.vertex_index, ev.force))
                elif ev.kind == "sustained_start":
                    voice.sustained = True
                elif ev.kind == "sustained_stop":
                    voice.sustained = False

            drive = None
            raw = None
            if voice.granular is not None:
                grains = voice.granular.stream(start, b, self.rng)
                if voice.granular.engaged:
                    drive = grains
                else:
                    raw = grains
            if voice.sustained:
                noise = SUSTAIN_NOISE_AMP * self.rng.standard_normal(b)
                drive = noise if drive is None else drive + noise

            idle = drive is None and not impulses and not voice.bank.state.any()
            if idle:
                mono = raw
            else:
                mono = voice.bank.render(impulses=impulses, drive=drive)
                if raw is not None:
                    mono = mono + raw
            if mono is None:
                voice.prev_gain = voice.gain
                continue

            if voice.gain != voice.prev_gain:
                g = np.linspace(voice.prev_gain, voice.gain, b, endpoint=False)
                voice.prev_gain = voice.gain
            else:
                g = voice.gain
            mono = mono * g
            theta = (voice.pan + 1.0) * (np.pi / 4.0)
            left += mono * np.cos(theta)
            right += mono * np.sin(theta)

        mix = np.stack([left, right], axis=1)
        over = np.abs(mix) > 1.0
        if over.any():
            self.overload_count += int(over.sum())
        if self.clip:
            mix = soft_clip(mix)
        self.block_index += 1
        return mix

    def render_seconds(self, seconds: float) -> np.ndarray:
        n_blocks = int(np.ceil(seconds * self.sample_rate / self.block_size))
        return np.concatenate([self.render_block() for _ in range(n_blocks)])
