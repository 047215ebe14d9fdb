"""Mel spectrograms and spectral descriptors.

The filterbank is built as a partition of unity: triangular filters whose
edge members extend flat to the band limits, so the bank sums to one on
every FFT bin inside [f_min, f_max]. Log power is exact (10*log10) for
positive bins with a fixed floor for empty ones, which keeps amplitude
scaling an exact dB shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError

DEFAULT_FFT = 2048
DEFAULT_HOP = 512
DEFAULT_N_MELS = 64
DEFAULT_F_MIN = 30.0
DEFAULT_F_MAX = 16000.0

FLOOR_DB = -200.0


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 48000
    fft_size: int = DEFAULT_FFT
    hop: int = DEFAULT_HOP
    n_mels: int = DEFAULT_N_MELS
    f_min: float = DEFAULT_F_MIN
    f_max: float = DEFAULT_F_MAX

    def __post_init__(self):
        if not (0 <= self.f_min < self.f_max <= self.sample_rate / 2):
            raise ValueError("need 0 <= f_min < f_max <= Nyquist")
        if self.hop < 1 or self.fft_size < 4 or self.n_mels < 2:
            raise ValueError("bad STFT geometry")


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (n_mels, frames), dB
    config: MelConfig

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def mel_bin_edges_hz(self) -> np.ndarray:
        """(n_mels, 2) response support of each filter, in Hz."""
        pts = _mel_points(self.config)
        lo = np.concatenate([[self.config.f_min], pts[1:-1][:-1]])
        hi = np.concatenate([pts[1:-1][1:], [self.config.f_max]])
        return np.stack([lo, hi], axis=1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _mel_points(cfg: MelConfig) -> np.ndarray:
    """n_mels + 2 breakpoints from f_min to f_max, equally spaced in mel."""
    return mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))


def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """(n_mels, fft_size//2 + 1) triangular bank, partition of unity in band."""
    freqs = np.fft.rfftfreq(cfg.fft_size, d=1.0 / cfg.sample_rate)
    pts = _mel_points(cfg)
    bank = np.zeros((cfg.n_mels, len(freqs)))
    for i in range(cfg.n_mels):
        lo, peak, hi = pts[i], pts[i + 1], pts[i + 2]
        rising = (freqs - lo) / (peak - lo)
        falling = (hi - freqs) / (hi - peak)
        tri = np.clip(np.minimum(rising, falling), 0.0, 1.0)
        if i == 0:
            tri = np.where(freqs <= peak, 1.0, tri)
        if i == cfg.n_mels - 1:
            tri = np.where(freqs >= peak, 1.0, tri)
        bank[i] = tri
    in_band = (freqs >= cfg.f_min) & (freqs <= cfg.f_max)
    bank[:, ~in_band] = 0.0
    return bank


def stft_power(audio: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """(fft_size//2 + 1, frames) Hann-windowed power spectrogram."""
    audio = np.asarray(audio, dtype=np.float64).ravel()
    if len(audio) < cfg.fft_size:
        raise AnalysisError(
            f"audio has {len(audio)} samples; need at least fft_size={cfg.fft_size}"
        )
    n_frames = (len(audio) - cfg.fft_size) // cfg.hop + 1
    window = np.hanning(cfg.fft_size)
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = audio[idx] * window
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real**2 + spec.imag**2).T


def mel_spectrogram(audio: np.ndarray, cfg: MelConfig | None = None) -> MelSpectrogram:
    cfg = cfg or MelConfig()
    power = stft_power(audio, cfg)
    mel_power = mel_filterbank(cfg) @ power
    db = np.full_like(mel_power, FLOOR_DB)
    pos = mel_power > 0
    db[pos] = 10.0 * np.log10(mel_power[pos])
    np.maximum(db, FLOOR_DB, out=db)
    return MelSpectrogram(values=db, config=cfg)


def spectral_centroid(audio: np.ndarray, sample_rate: int) -> float:
    """Power-weighted mean frequency over the full-signal spectrum."""
    audio = np.asarray(audio, dtype=np.float64).ravel()
    if len(audio) == 0 or not np.any(audio):
        raise AnalysisError("silent input has no spectral centroid")
    spec = np.fft.rfft(audio)
    power = spec.real**2 + spec.imag**2
    freqs = np.fft.rfftfreq(len(audio), d=1.0 / sample_rate)
    total = power.sum()
    if total == 0:
        raise AnalysisError("silent input has no spectral centroid")
    return float((freqs * power).sum() / total)


def export_csv(spec: MelSpectrogram, path) -> None:
    """Matrix CSV: one row per mel band, header comments carry the geometry."""
    cfg = spec.config
    header = (
        "schema: somasonic.melspec.v1\n"
        f"sample_rate: {cfg.sample_rate}\n"
        f"fft_size: {cfg.fft_size}\nhop: {cfg.hop}\nn_mels: {cfg.n_mels}\n"
        f"f_min: {cfg.f_min}\nf_max: {cfg.f_max}\nunits: dB"
    )
    np.savetxt(path, spec.values, delimiter=",", header=header)


def load_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))
