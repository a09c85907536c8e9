"""Log mel-filterbank (LFBE) front end and training-time chunking."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .errors import DataError

SUPPORTED_RATES = (8000, 16000)
LOG_FLOOR = 1e-10
N_FFT = 512


@dataclass
class FeatureSequence:
    frames: np.ndarray  # (n_frames, n_mels) float32
    hop_ms: float = 10.0
    window_ms: float = 25.0
    source_duration_ms: int = 0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise DataError(f"frames must be 2-D, got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("non-finite feature values")

    def __len__(self):
        return self.frames.shape[0]

    def frame_end_ms(self, i: int) -> float:
        """Time at which frame ``i`` is complete."""
        return i * self.hop_ms + self.window_ms

    def frames_available(self, t_ms: float) -> int:
        """Number of frames fully inside the first ``t_ms`` of audio."""
        return n_frames_for(t_ms, self.window_ms, self.hop_ms, max_frames=len(self))


def n_frames_for(t_ms: float, window_ms: float, hop_ms: float, max_frames: int = None) -> int:
    if t_ms < window_ms:
        return 0
    n = int(np.floor((t_ms - window_ms) / hop_ms + 1e-9)) + 1
    return n if max_frames is None else min(n, max_frames)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int = N_FFT, n_mels: int = 64,
                   fmin: float = 0.0, fmax: float = None) -> np.ndarray:
    """HTK-style triangular filters with unit peaks, shape (n_mels, n_fft//2 + 1)."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_signal(x: np.ndarray, win: int, hop: int) -> np.ndarray:
    n = (len(x) - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def compute_lfbe(pcm: np.ndarray, sample_rate: int, window_ms: float = 25.0,
                 hop_ms: float = 10.0, n_mels: int = 64) -> FeatureSequence:
    """Log mel-filterbank energies of 16-bit mono PCM.

    Hann-windowed frames, 512-point power spectrum, HTK mel filters over
    [0, Nyquist], ``log(energy + 1e-10)``.
    """
    if sample_rate not in SUPPORTED_RATES:
        raise DataError(f"unsupported sample rate {sample_rate}; expected one of {SUPPORTED_RATES}")
    win = int(round(sample_rate * window_ms / 1000.0))
    hop = int(round(sample_rate * hop_ms / 1000.0))
    x = np.asarray(pcm)
    if x.ndim != 1:
        raise DataError("PCM must be mono")
    if len(x) < win:
        raise DataError(f"signal of {len(x)} samples is shorter than one {win}-sample window")
    if win > N_FFT:
        raise DataError(f"{window_ms} ms window exceeds the {N_FFT}-point FFT")
    x = x.astype(np.float64) / 32768.0
    frames = frame_signal(x, win, hop) * np.hanning(win + 2)[1:-1]
    power = np.abs(np.fft.rfft(frames, n=N_FFT, axis=1)) ** 2
    energies = power @ mel_filterbank(sample_rate, N_FFT, n_mels).T
    lfbe = np.log(energies + LOG_FLOOR)
    return FeatureSequence(lfbe.astype(np.float32), hop_ms, window_ms,
                           int(round(1000.0 * len(x) / sample_rate)))


def read_wav(path) -> Tuple[np.ndarray, int]:
    """Read a 16-bit mono WAV file into (int16 samples, sample rate)."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise DataError(f"{path}: expected 16-bit mono WAV")
        rate = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return data, rate


def write_wav(path, pcm: np.ndarray, sample_rate: int) -> None:
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(np.asarray(pcm, dtype="<i2").tobytes())


def add_noise(pcm: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Additive white noise at ``snr_db`` (the augmentation used in place of room simulation)."""
    x = pcm.astype(np.float64)
    p_sig = np.mean(x ** 2) if x.size else 0.0
    noise = rng.normal(0.0, np.sqrt(p_sig / (10 ** (snr_db / 10.0)) + 1e-12), size=x.shape)
    return np.clip(np.round(x + noise), -32768, 32767).astype(np.int16)


def chunk_sequence(frames, chunk_len: int = 36, hop: int = 18) -> List[np.ndarray]:
    """Overlapping fixed-length chunks; a trailing partial chunk is dropped."""
    if chunk_len < 1 or hop < 1:
        raise ValueError("chunk_len and hop must be >= 1")
    n = len(frames)
    return [frames[s:s + chunk_len] for s in range(0, n - chunk_len + 1, hop)]


def chunk_starts(n_frames: int, chunk_len: int = 36, hop: int = 18) -> List[int]:
    return list(range(0, n_frames - chunk_len + 1, hop))
