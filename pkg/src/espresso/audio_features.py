"""Onset density from audio, and the provider seam for the other features.

Seven of the eight perceptual dimensions come from an external model and
are only ever ingested here, never computed. The eighth, onset density,
is a proxy for perceived speed and is simple enough to measure directly:
count note attacks and divide by the clip duration.

Attacks show up as sudden energy increases across the spectrum, so we
use half-wave-rectified spectral flux: take an STFT, subtract each
magnitude frame from its successor, keep only the positive differences,
and sum over frequency. The flux curve is smoothed, normalized to its
maximum (which makes the whole measure invariant to input gain), and
peaks that rise above the local median by a fixed margin are counted as
onsets, subject to a minimum spacing so one attack is never counted
twice.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import MidLevelVector, Performance
from .errors import AudioFormatError, ClipTooShortError, IntegrityError

_log = logging.getLogger(__name__)

# Frames around each candidate peak used for the local median baseline.
_MEDIAN_HALF_WINDOW_SECONDS = 0.5

MIN_CLIP_SECONDS = 1.0


@dataclass(frozen=True)
class AudioClip:
    """Mono samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioFormatError(f"bad sample rate {self.sample_rate}")
        if self.samples.size == 0:
            raise AudioFormatError("empty audio clip")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class OnsetConfig:
    frame_size: int = 2048
    hop_size: int = 512
    flux_smoothing: int = 3
    peak_threshold_delta: float = 0.07
    min_inter_onset_gap: float = 0.05

    def __post_init__(self):
        if self.frame_size <= 0 or self.frame_size & (self.frame_size - 1):
            raise ValueError(f"frame_size must be a power of two, got {self.frame_size}")
        if not (0 < self.hop_size <= self.frame_size):
            raise ValueError("hop_size must be positive and <= frame_size")
        if self.flux_smoothing < 1:
            raise ValueError("flux_smoothing must be >= 1")
        if self.peak_threshold_delta < 0:
            raise ValueError("peak_threshold_delta must be >= 0")
        if self.min_inter_onset_gap <= 0:
            raise ValueError("min_inter_onset_gap must be positive")


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise AudioFormatError(f"truncated file while reading {what}")
    return data


def decode_wav(path: str | Path) -> AudioClip:
    """Decode a RIFF/WAVE file (16-bit PCM or 32-bit float).

    Multi-channel audio is averaged down to mono and integer samples are
    scaled to [-1, 1]. Anything else (mu-law, ADPCM, 24-bit, ...) is
    rejected as unsupported.
    """
    path = Path(path)
    with path.open("rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise AudioFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) == 0:
                break
            if len(chunk_header) < 8:
                raise AudioFormatError(f"{path}: truncated chunk header")
            chunk_id, size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, size, "data chunk")
            else:
                fh.seek(size + (size & 1), 1)
                continue
            if size & 1:
                fh.seek(1, 1)

    if fmt is None:
        raise AudioFormatError(f"{path}: missing fmt chunk")
    if data is None:
        raise AudioFormatError(f"{path}: missing data chunk")
    if len(data) == 0:
        raise AudioFormatError(f"{path}: zero-length data chunk")
    if len(fmt) < 16:
        raise AudioFormatError(f"{path}: malformed fmt chunk")

    format_code, channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if channels < 1:
        raise AudioFormatError(f"{path}: no channels")
    if format_code == 1 and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif format_code == 3 and bits == 32:
        raw = np.frombuffer(data, dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        raise AudioFormatError(
            f"{path}: unsupported encoding (format code {format_code}, "
            f"{bits}-bit); only 16-bit PCM and 32-bit float are handled"
        )
    if samples.size == 0:
        raise AudioFormatError(f"{path}: zero-length data chunk")
    if channels > 1:
        usable = (samples.size // channels) * channels
        samples = samples[:usable].reshape(-1, channels).mean(axis=1)
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples=samples, sample_rate=int(sample_rate))


def encode_wav_pcm16(samples: np.ndarray, sample_rate: int, path: str | Path) -> None:
    """Write mono 16-bit PCM. The counterpart of decode_wav for fixtures."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    # Same 1/32768 scale as the decoder, so grid values round-trip exactly.
    ints = np.clip(np.round(clipped * 32768.0), -32768, 32767).astype("<i2")
    data = ints.tobytes()
    with Path(path).open("wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sample_rate,
                                       sample_rate * 2, 2, 16))
        fh.write(b"data" + struct.pack("<I", len(data)))
        fh.write(data)


def _spectral_flux(clip: AudioClip, config: OnsetConfig) -> tuple[np.ndarray, float]:
    """Half-wave-rectified spectral flux per frame and the frame rate."""
    window = np.hanning(config.frame_size)
    samples = clip.samples
    frame_count = 1 + max(0, (samples.size - config.frame_size) // config.hop_size)
    previous = np.zeros(config.frame_size // 2 + 1)
    flux = np.empty(frame_count)
    for i in range(frame_count):
        start = i * config.hop_size
        frame = samples[start : start + config.frame_size]
        magnitude = np.abs(np.fft.rfft(frame * window))
        flux[i] = np.maximum(magnitude - previous, 0.0).sum()
        previous = magnitude
    return flux, clip.sample_rate / config.hop_size


def _smooth(values: np.ndarray, width: int) -> np.ndarray:
    if width <= 1 or values.size == 0:
        return values
    kernel = np.ones(width) / width
    return np.convolve(values, kernel, mode="same")


def _local_median(values: np.ndarray, half_window: int) -> np.ndarray:
    out = np.empty_like(values)
    for i in range(values.size):
        lo = max(0, i - half_window)
        hi = min(values.size, i + half_window + 1)
        out[i] = np.median(values[lo:hi])
    return out


def onset_density(clip: AudioClip, config: OnsetConfig = OnsetConfig()) -> float:
    """Onsets per second over the whole clip."""
    if clip.duration < MIN_CLIP_SECONDS:
        raise ClipTooShortError(
            f"clip too short: {clip.duration:.3f} s < {MIN_CLIP_SECONDS} s"
        )
    flux, frame_rate = _spectral_flux(clip, config)
    flux = _smooth(flux, config.flux_smoothing)
    peak = flux.max() if flux.size else 0.0
    if peak <= 0.0:
        return 0.0
    flux = flux / peak

    median_half = max(1, int(round(_MEDIAN_HALF_WINDOW_SECONDS * frame_rate)))
    baseline = _local_median(flux, median_half)
    threshold = baseline + config.peak_threshold_delta

    min_gap_frames = config.min_inter_onset_gap * frame_rate
    count = 0
    last_onset_frame = -np.inf
    for i in range(flux.size):
        left = flux[i - 1] if i > 0 else -np.inf
        right = flux[i + 1] if i + 1 < flux.size else -np.inf
        if flux[i] >= left and flux[i] > right and flux[i] > threshold[i]:
            if i - last_onset_frame >= min_gap_frames:
                count += 1
                last_onset_frame = i
    return count / clip.duration


class PassthroughProvider:
    """Serve the feature vector already stored in the catalog."""

    def features_for(self, performance: Performance) -> MidLevelVector:
        return performance.features


class OnsetComputeProvider:
    """Keep the seven stored rating-scale features but replace the stored
    onset density with one measured from the performance's audio file.

    Replaced values are recorded in ``overrides`` so reports can say where
    each number came from.
    """

    def __init__(self, config: OnsetConfig = OnsetConfig(), audio_root: str | Path | None = None):
        self.config = config
        self.audio_root = Path(audio_root) if audio_root is not None else None
        self.overrides: list[tuple[str, float, float]] = []

    def features_for(self, performance: Performance) -> MidLevelVector:
        if not performance.audio_path:
            raise IntegrityError(
                f"performance {performance.performance_id!r} has no audio_path; "
                "cannot compute onset density"
            )
        audio_path = Path(performance.audio_path)
        if self.audio_root is not None and not audio_path.is_absolute():
            audio_path = self.audio_root / audio_path
        clip = decode_wav(audio_path)
        density = onset_density(clip, self.config)
        stored = performance.features.onset_density
        self.overrides.append((performance.performance_id, stored, density))
        values = performance.features.as_list()
        values[-1] = density
        return MidLevelVector.from_values(values, ingested=True)


def provide_features(provider, performance: Performance) -> MidLevelVector:
    """Fetch the full eight-dimensional vector for one performance."""
    return provider.features_for(performance)
