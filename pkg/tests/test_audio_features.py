from __future__ import annotations

import struct

import numpy as np
import pytest

from espresso.audio_features import (
    AudioClip,
    OnsetConfig,
    OnsetComputeProvider,
    PassthroughProvider,
    decode_wav,
    encode_wav_pcm16,
    onset_density,
    provide_features,
)
from espresso.corpus import MidLevelVector, Performance
from espresso.errors import AudioFormatError, ClipTooShortError, IntegrityError

from audio_fixtures import RATE, click_track, write_wav


def write_raw_wav(path, fmt_chunk, data, extra_chunks=b""):
    body = b"WAVE" + extra_chunks + fmt_chunk + data
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def fmt_pcm(format_code=1, channels=1, rate=RATE, bits=16):
    block = channels * bits // 8
    payload = struct.pack(
        "<HHIIHH", format_code, channels, rate, rate * block, block, bits
    )
    return b"fmt " + struct.pack("<I", len(payload)) + payload


def data_chunk(payload: bytes) -> bytes:
    return b"data" + struct.pack("<I", len(payload)) + payload


def test_roundtrip_is_sample_exact(tmp_path):
    rng = np.random.default_rng(0)
    # Values on the 1/32768 grid survive the int16 round trip exactly.
    samples = rng.integers(-32768, 32768, size=2048) / 32768.0
    path = write_wav(tmp_path, samples)
    clip = decode_wav(path)
    assert clip.sample_rate == RATE
    assert np.array_equal(clip.samples, samples)


def test_decode_float32(tmp_path):
    samples = np.linspace(-1.0, 1.0, 500, dtype=np.float32)
    path = tmp_path / "f32.wav"
    write_raw_wav(
        path,
        fmt_pcm(format_code=3, bits=32),
        data_chunk(samples.tobytes()),
    )
    clip = decode_wav(path)
    assert np.allclose(clip.samples, samples.astype(np.float64))


def test_decode_stereo_averages_channels(tmp_path):
    left = np.full(300, 0.5)
    right = np.full(300, -0.5)
    interleaved = np.empty(600)
    interleaved[0::2] = left
    interleaved[1::2] = right
    ints = np.round(interleaved * 32768.0).astype("<i2")
    path = tmp_path / "stereo.wav"
    write_raw_wav(path, fmt_pcm(channels=2), data_chunk(ints.tobytes()))
    clip = decode_wav(path)
    assert clip.samples.size == 300
    assert np.allclose(clip.samples, 0.0, atol=1.0 / 32768.0)


def test_decode_skips_unknown_chunks(tmp_path):
    ints = (np.ones(200) * 1000).astype("<i2")
    # Odd-sized LIST chunk checks the pad-byte handling too.
    junk = b"LIST" + struct.pack("<I", 5) + b"INFOx" + b"\x00"
    path = tmp_path / "chunky.wav"
    write_raw_wav(path, fmt_pcm(), data_chunk(ints.tobytes()), extra_chunks=junk)
    clip = decode_wav(path)
    assert clip.samples.size == 200


def test_decode_rejects_mulaw(tmp_path):
    path = tmp_path / "mulaw.wav"
    write_raw_wav(path, fmt_pcm(format_code=7, bits=8), data_chunk(b"\x00" * 64))
    with pytest.raises(AudioFormatError, match="format code 7"):
        decode_wav(path)


def test_decode_rejects_24_bit(tmp_path):
    path = tmp_path / "pcm24.wav"
    write_raw_wav(path, fmt_pcm(bits=24), data_chunk(b"\x00" * 96))
    with pytest.raises(AudioFormatError, match="24-bit"):
        decode_wav(path)


def test_decode_rejects_non_riff(tmp_path):
    path = tmp_path / "noise.bin"
    path.write_bytes(b"OggS" + b"\x00" * 100)
    with pytest.raises(AudioFormatError, match="RIFF"):
        decode_wav(path)


def test_decode_rejects_truncated_data(tmp_path):
    path = tmp_path / "trunc.wav"
    # data chunk declares 1000 bytes but the file ends early
    write_raw_wav(
        path, fmt_pcm(), b"data" + struct.pack("<I", 1000) + b"\x00" * 10
    )
    with pytest.raises(AudioFormatError, match="truncated"):
        decode_wav(path)


def test_decode_rejects_missing_chunks(tmp_path):
    path = tmp_path / "nodata.wav"
    write_raw_wav(path, fmt_pcm(), b"")
    with pytest.raises(AudioFormatError, match="data"):
        decode_wav(path)
    path2 = tmp_path / "nofmt.wav"
    write_raw_wav(path2, b"", data_chunk(b"\x00\x00"))
    with pytest.raises(AudioFormatError, match="fmt"):
        decode_wav(path2)


def test_decode_rejects_empty_data(tmp_path):
    path = tmp_path / "empty.wav"
    write_raw_wav(path, fmt_pcm(), data_chunk(b""))
    with pytest.raises(AudioFormatError, match="zero-length"):
        decode_wav(path)


def test_audio_clip_validation():
    with pytest.raises(AudioFormatError):
        AudioClip(samples=np.zeros(0), sample_rate=RATE)
    with pytest.raises(AudioFormatError):
        AudioClip(samples=np.zeros(10), sample_rate=0)
    clip = AudioClip(samples=np.zeros(RATE * 2), sample_rate=RATE)
    assert clip.duration == 2.0


def test_onset_config_validation():
    with pytest.raises(ValueError):
        OnsetConfig(frame_size=1000)
    with pytest.raises(ValueError):
        OnsetConfig(hop_size=0)
    with pytest.raises(ValueError):
        OnsetConfig(hop_size=4096)
    with pytest.raises(ValueError):
        OnsetConfig(flux_smoothing=0)
    with pytest.raises(ValueError):
        OnsetConfig(peak_threshold_delta=-0.1)
    with pytest.raises(ValueError):
        OnsetConfig(min_inter_onset_gap=0.0)


def test_short_clip_rejected():
    clip = AudioClip(samples=np.zeros(RATE // 2), sample_rate=RATE)
    with pytest.raises(ClipTooShortError):
        onset_density(clip)


def test_silence_has_zero_density():
    clip = AudioClip(samples=np.zeros(10 * RATE), sample_rate=RATE)
    assert onset_density(clip) == 0.0


def test_click_track_density_matches_rate():
    clip = AudioClip(samples=click_track(clicks_per_second=4.0), sample_rate=RATE)
    density = onset_density(clip)
    assert abs(density - 4.0) <= 0.2


def test_density_tracks_click_rate():
    four = onset_density(
        AudioClip(samples=click_track(clicks_per_second=4.0), sample_rate=RATE)
    )
    eight = onset_density(
        AudioClip(samples=click_track(clicks_per_second=8.0), sample_rate=RATE)
    )
    two = onset_density(
        AudioClip(samples=click_track(clicks_per_second=2.0), sample_rate=RATE)
    )
    assert 1.8 <= eight / four <= 2.2
    assert 1.8 <= four / two <= 2.2


def test_density_is_gain_invariant():
    base = click_track(clicks_per_second=4.0, amplitude=1.0)
    densities = [
        onset_density(AudioClip(samples=gain * base, sample_rate=RATE))
        for gain in (0.1, 0.5, 1.0)
    ]
    reference = densities[-1]
    for value in densities:
        assert abs(value - reference) <= 0.02 * reference


def test_single_attack_counts_once():
    samples = np.zeros(10 * RATE)
    burst_len = int(0.004 * RATE)
    burst = np.random.default_rng(1).uniform(-0.9, 0.9, burst_len)
    samples[RATE : RATE + burst_len] = burst
    density = onset_density(AudioClip(samples=samples, sample_rate=RATE))
    assert abs(density - 0.1) <= 0.05


def perf(audio_path=None, onset=3.0):
    features = MidLevelVector.from_values(
        [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, onset]
    )
    return Performance(
        performance_id="perf_x",
        piece_id="piece_x",
        artist_label="A",
        features=features,
        audio_path=audio_path,
    )


def test_passthrough_provider_returns_stored_features():
    p = perf()
    assert provide_features(PassthroughProvider(), p) is p.features


def test_compute_provider_replaces_only_onset(tmp_path):
    path = write_wav(tmp_path, click_track(clicks_per_second=4.0))
    provider = OnsetComputeProvider()
    p = perf(audio_path=str(path), onset=99.0)
    features = provide_features(provider, p)
    assert features.as_list()[:7] == p.features.as_list()[:7]
    assert abs(features.onset_density - 4.0) <= 0.2
    assert len(provider.overrides) == 1
    perf_id, stored, computed = provider.overrides[0]
    assert perf_id == "perf_x"
    assert stored == 99.0
    assert computed == features.onset_density


def test_compute_provider_resolves_relative_paths(tmp_path):
    write_wav(tmp_path, click_track(clicks_per_second=2.0), name="rel.wav")
    provider = OnsetComputeProvider(audio_root=tmp_path)
    features = provide_features(provider, perf(audio_path="rel.wav"))
    assert abs(features.onset_density - 2.0) <= 0.2


def test_compute_provider_requires_audio_path():
    provider = OnsetComputeProvider()
    with pytest.raises(IntegrityError, match="perf_x"):
        provide_features(provider, perf(audio_path=None))
