"""Pitch, harmonic sine excitation and A-weighted loudness features."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .audio_io import SAMPLE_RATE, AudioClip

NUM_HARMONICS = 8
SINE_AMPLITUDE = 0.1
NOISE_STD = 0.003
UNVOICED_NOISE_GAIN = 100.0

F0_HOP = 160
F0_FMIN = 40.0
F0_FMAX = 1500.0

LOUDNESS_HOP = 64
LOUDNESS_NFFT = 1024
LOUDNESS_FLOOR = 1e-7
LOUDNESS_FLOOR_DB = 10.0 * np.log10(LOUDNESS_FLOOR)


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class F0Track:
    values: np.ndarray
    hop: int
    sample_rate: int

    def __len__(self) -> int:
        return len(self.values)

    @property
    def voiced(self) -> np.ndarray:
        return self.values > 0


@dataclass(frozen=True)
class SineExcitation:
    values: np.ndarray  # (num_harmonics, T)
    sample_rate: int

    @property
    def num_harmonics(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LoudnessTrack:
    values: np.ndarray
    hop: int
    sample_rate: int

    def __len__(self) -> int:
        return len(self.values)


# --- F0 -------------------------------------------------------------------

def _frame(x: np.ndarray, frame_length: int, hop: int, n_frames: int) -> np.ndarray:
    """Frames centered on multiples of `hop`, zero padded at the edges."""
    half = frame_length // 2
    need = (n_frames - 1) * hop + frame_length
    padded = np.zeros(max(need, len(x) + 2 * half))
    padded[half:half + len(x)] = x
    idx = np.arange(frame_length)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def yin(clip: AudioClip, hop: int = F0_HOP, fmin: float = F0_FMIN, fmax: float = F0_FMAX,
        frame_length: int = 1024, threshold: float = 0.15,
        silence_rms: float = 1e-4) -> F0Track:
    """Autocorrelation pitch tracker with cumulative-mean-normalized difference.

    Frames whose best normalized dip is above `threshold`, or whose RMS is
    below `silence_rms`, are unvoiced (0 Hz).
    """
    sr = clip.sample_rate
    x = clip.samples
    win = frame_length // 2
    tau_min = max(int(np.floor(sr / fmax)), 2)
    tau_max = min(int(np.ceil(sr / fmin)), frame_length - win - 1)
    n_frames = int(np.ceil(len(x) / hop))
    frames = _frame(x, frame_length, hop, n_frames)

    # difference function d(tau) = e0 + e_tau - 2 r(tau) through FFT autocorrelation
    n_fft = 1 << int(np.ceil(np.log2(2 * frame_length)))
    spec_full = np.fft.rfft(frames, n_fft)
    spec_win = np.fft.rfft(frames[:, :win], n_fft)
    r = np.fft.irfft(spec_full * np.conj(spec_win), n_fft)[:, :tau_max + 1]
    sq = np.cumsum(np.pad(frames ** 2, ((0, 0), (1, 0))), axis=1)
    taus = np.arange(tau_max + 1)
    energy0 = sq[:, win][:, None]
    energy_tau = sq[:, taus + win] - sq[:, taus]
    diff = np.maximum(energy0 + energy_tau - 2.0 * r, 0.0)

    cum = np.cumsum(diff[:, 1:], axis=1)
    cmnd = np.ones_like(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        cmnd[:, 1:] = diff[:, 1:] * taus[1:] / cum
    cmnd[~np.isfinite(cmnd)] = 1.0

    f0 = np.zeros(n_frames)
    rms = np.sqrt(energy0[:, 0] / win)
    search = cmnd[:, tau_min:tau_max + 1]
    for i in range(n_frames):
        if rms[i] < silence_rms:
            continue
        row = search[i]
        below = np.flatnonzero(row < threshold)
        if below.size == 0:
            continue
        j = below[0]
        # walk to the bottom of the first dip under threshold
        while j + 1 < len(row) and row[j + 1] < row[j]:
            j += 1
        tau = tau_min + j
        shift = 0.0
        if tau_min < tau < tau_max:
            a, b, c = cmnd[i, tau - 1], cmnd[i, tau], cmnd[i, tau + 1]
            denom = a - 2 * b + c
            if denom > 0:
                shift = 0.5 * (a - c) / denom
        freq = sr / (tau + shift)
        if fmin <= freq <= fmax:
            f0[i] = freq
    return F0Track(f0, hop, sr)


def extract_f0(clip: AudioClip, hop: int = F0_HOP, fmin: float = F0_FMIN, fmax: float = F0_FMAX,
               backend: Callable[..., F0Track] | None = None) -> F0Track:
    """Frame-rate F0 in Hz (0 marks unvoiced frames).

    `backend` may be any callable with the signature of `yin`.
    """
    if clip.sample_rate != SAMPLE_RATE:
        raise FeatureError(f"extract_f0 expects {SAMPLE_RATE} Hz audio, got {clip.sample_rate}")
    if not 0 < fmin < fmax:
        raise FeatureError(f"need 0 < fmin < fmax, got {fmin}, {fmax}")
    if len(clip) < 1024:
        raise FeatureError(f"clip of {len(clip)} samples is shorter than the analysis window")
    track = (backend or yin)(clip, hop=hop, fmin=fmin, fmax=fmax)
    values = np.asarray(track.values, dtype=np.float64)
    values = np.where(np.isfinite(values) & (values > 0), values, 0.0)
    return F0Track(values, hop, clip.sample_rate)


def linear_interpolate(values, target_len: int) -> np.ndarray:
    """Piecewise-linear resampling onto `target_len` uniformly spaced points.

    Endpoints map to endpoints; zeros are interpolated like any other value.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise FeatureError("cannot interpolate an empty sequence")
    if target_len < 1:
        raise FeatureError("target_len must be >= 1")
    if values.size == 1:
        return np.full(target_len, values[0])
    if target_len == 1:
        return values[:1].copy()
    pos = np.linspace(0.0, values.size - 1, target_len)
    return np.interp(pos, np.arange(values.size), values)


def harmonic_sine_excitation(f0, num_harmonics: int = NUM_HARMONICS,
                             sample_rate: int = SAMPLE_RATE,
                             rng: np.random.Generator | None = None,
                             noise_std: float = NOISE_STD,
                             phases=None) -> SineExcitation:
    """Multi-harmonic sine excitation from an audio-rate F0 sequence.

    Voiced samples get 0.1*sin(cumulative phase of harmonic i + phi_i) plus
    noise; unvoiced samples get 100x the noise. The phase accumulator runs
    across unvoiced gaps. `phases` overrides the random initial phases.
    """
    if num_harmonics < 1:
        raise FeatureError("num_harmonics must be >= 1")
    f = np.asarray(f0, dtype=np.float64)
    if np.any(f < 0) or not np.all(np.isfinite(f)):
        raise FeatureError("F0 values must be finite and non-negative")
    rng = np.random.default_rng() if rng is None else rng
    if phases is None:
        phases = rng.uniform(0.0, 2 * np.pi, size=num_harmonics)
    phases = np.asarray(phases, dtype=np.float64).reshape(num_harmonics, 1)
    harmonics = np.arange(1, num_harmonics + 1, dtype=np.float64)[:, None]

    base_phase = np.cumsum(2 * np.pi * f / sample_rate)
    voiced = SINE_AMPLITUDE * np.sin(harmonics * base_phase[None, :] + phases)
    noise = rng.normal(0.0, noise_std, size=(num_harmonics, f.size)) if noise_std > 0 \
        else np.zeros((num_harmonics, f.size))
    values = np.where(f[None, :] > 0, voiced + noise, UNVOICED_NOISE_GAIN * noise)
    return SineExcitation(values, sample_rate)


# --- loudness -------------------------------------------------------------

def a_weighting_db(freqs) -> np.ndarray:
    """IEC 61672 A-weighting gain in dB (0 dB at 1 kHz)."""
    f2 = np.asarray(freqs, dtype=np.float64) ** 2
    num = 12194.0 ** 2 * f2 ** 2
    den = ((f2 + 20.6 ** 2) * np.sqrt((f2 + 107.7 ** 2) * (f2 + 737.9 ** 2)) * (f2 + 12194.0 ** 2))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(num / den) + 2.0


def a_weighted_loudness(clip: AudioClip, hop: int = LOUDNESS_HOP,
                        n_fft: int = LOUDNESS_NFFT) -> LoudnessTrack:
    """Per-frame A-weighted power in dB, floored at 10*log10(1e-7).

    Frame k is centered on sample k*hop; there are ceil(len/hop) frames.
    """
    if len(clip) == 0:
        raise FeatureError("empty clip")
    n_frames = int(np.ceil(len(clip) / hop))
    window = np.hanning(n_fft + 1)[:-1]
    frames = _frame(clip.samples, n_fft, hop, n_frames) * window
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2 / window.sum() ** 2
    freqs = np.fft.rfftfreq(n_fft, 1.0 / clip.sample_rate)
    weight = 10.0 ** (a_weighting_db(freqs) / 10.0)
    weighted = (power * weight).sum(axis=1)
    values = 10.0 * np.log10(np.maximum(weighted, LOUDNESS_FLOOR))
    return LoudnessTrack(values, hop, clip.sample_rate)


def loudness_condition(values) -> np.ndarray:
    """Map dB loudness from [floor, 0] onto [-1, 1] before it enters the network."""
    half = -LOUDNESS_FLOOR_DB / 2
    return (np.asarray(values, dtype=np.float64) + half) / half
