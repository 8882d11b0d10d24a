"""Log mel filter-bank energies (LFBEs) from PCM audio."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcmAudio:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio must be mono")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrontendConfig:
    window_ms: float = 25.0
    shift_ms: float = 10.0
    num_filters: int = 64
    fft_size: int = 512
    floor: float = 1e-10

    def __post_init__(self):
        if self.window_ms < self.shift_ms or self.shift_ms <= 0:
            raise ValueError("need window_ms >= shift_ms > 0")
        if self.num_filters < 1:
            raise ValueError("num_filters must be >= 1")
        if self.fft_size < 1 or self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if self.floor <= 0:
            raise ValueError("floor must be positive")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_ms * sample_rate / 1000.0))

    def shift_samples(self, sample_rate: int) -> int:
        return int(round(self.shift_ms * sample_rate / 1000.0))


@dataclass(frozen=True)
class LfbeSequence:
    frames: np.ndarray  # (T, num_filters)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def filter_centers(num_filters: int, sample_rate: int) -> np.ndarray:
    """Edge and center frequencies (Hz), ``num_filters + 2`` points from 0 to Nyquist."""
    mels = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_filters + 2)
    return mel_to_hz(mels)


def mel_filterbank(num_filters: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular mel filters evaluated at the rfft bin frequencies.

    Returns a ``(num_filters, fft_size // 2 + 1)`` matrix.
    """
    if num_filters < 1:
        raise ValueError("num_filters must be >= 1")
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two")
    edges = filter_centers(num_filters, sample_rate)
    bin_hz = sample_rate / fft_size
    widths = edges[2:] - edges[:-2]
    if np.any(widths < bin_hz):
        raise ValueError(
            f"{num_filters} filters too many for fft_size {fft_size}: "
            f"narrowest filter spans {widths.min():.2f} Hz < one bin ({bin_hz:.2f} Hz)"
        )
    freqs = np.arange(fft_size // 2 + 1) * bin_hz
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - left) / (center - left)
    falling = (right - freqs) / (right - center)
    fbank = np.maximum(0.0, np.minimum(rising, falling))
    if np.any(fbank.sum(axis=1) <= 0):
        raise ValueError(f"{num_filters} filters too many for fft_size {fft_size}: empty filter")
    return fbank


def frame_signal(samples: np.ndarray, window: int, shift: int) -> np.ndarray:
    if len(samples) < window:
        return np.zeros((0, window))
    n_frames = (len(samples) - window) // shift + 1
    view = np.lib.stride_tricks.sliding_window_view(samples, window)
    return view[: (n_frames - 1) * shift + 1 : shift]


def compute_lfbe(audio: PcmAudio, config: FrontendConfig | None = None) -> LfbeSequence:
    config = config or FrontendConfig()
    if len(audio.samples) == 0:
        raise ValueError("audio is empty")
    window = config.window_samples(audio.sample_rate)
    shift = config.shift_samples(audio.sample_rate)
    if config.fft_size < window:
        raise ValueError(f"fft_size {config.fft_size} shorter than window ({window} samples)")
    fbank = mel_filterbank(config.num_filters, config.fft_size, audio.sample_rate)
    frames = frame_signal(audio.samples, window, shift)
    if frames.shape[0] == 0:
        return LfbeSequence(np.zeros((0, config.num_filters)))
    spectrum = np.fft.rfft(frames * np.hamming(window), n=config.fft_size)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ fbank.T
    return LfbeSequence(np.log(np.maximum(energies, config.floor)))


def read_wav(path, expected_rate: int | None = None) -> PcmAudio:
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio")
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(f"{path}: sample rate {rate} != expected {expected_rate} (resampling unsupported)")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return PcmAudio(samples, rate)


def write_wav(path, audio: PcmAudio) -> None:
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate)
        wf.writeframes(pcm.tobytes())
