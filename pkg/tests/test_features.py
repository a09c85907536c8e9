import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acoustext.errors import DataError
from acoustext.features import (
    FeatureSequence, add_noise, chunk_sequence, chunk_starts, compute_lfbe, hz_to_mel,
    mel_filterbank, mel_to_hz, n_frames_for, read_wav, write_wav)


def tone(sr=16000, seconds=1.0, hz=440.0, amp=8000):
    t = np.arange(int(sr * seconds)) / sr
    return (amp * np.sin(2 * np.pi * hz * t)).astype(np.int16)


@pytest.mark.parametrize("sr", [8000, 16000])
def test_frame_count_one_second(sr):
    # (1000 - 25) // 10 + 1
    feats = compute_lfbe(tone(sr), sr)
    assert feats.frames.shape == (98, 64)
    assert feats.source_duration_ms == 1000


def test_silence_hits_log_floor():
    out = compute_lfbe(np.zeros(16000, np.int16), 16000).frames
    np.testing.assert_allclose(out, np.log(1e-10), rtol=1e-6)


def test_tone_peaks_in_matching_band():
    out = compute_lfbe(tone(hz=1000.0), 16000).frames
    fb = mel_filterbank(16000)
    freqs = np.fft.rfftfreq(512, 1 / 16000)
    expected = int(np.argmax(fb[:, np.argmin(np.abs(freqs - 1000.0))]))
    assert abs(int(np.argmax(out.mean(axis=0))) - expected) <= 1


@pytest.mark.parametrize("pcm, sr", [
    (np.zeros(16000, np.int16), 44100),
    (np.zeros(100, np.int16), 16000),
])
def test_rejects_bad_input(pcm, sr):
    with pytest.raises(DataError):
        compute_lfbe(pcm, sr)


def test_mel_round_trip_and_filterbank_shape():
    f = np.array([0.0, 300.0, 4000.0, 8000.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-6)
    fb = mel_filterbank(16000)
    assert fb.shape == (64, 257)
    assert fb.max() <= 1.0
    assert np.all(fb.sum(axis=1) > 0)


def test_frames_available_follows_window_and_hop():
    fs = FeatureSequence(np.zeros((98, 64)))
    assert fs.frames_available(24) == 0
    assert fs.frames_available(25) == 1
    assert fs.frames_available(600) == 58
    assert fs.frames_available(10**6) == 98
    assert n_frames_for(600, 25, 15) == 39


@given(st.integers(0, 400), st.integers(1, 50), st.integers(1, 50))
def test_chunks_have_fixed_length(n, length, hop):
    frames = np.arange(n)
    chunks = chunk_sequence(frames, length, hop)
    assert all(len(c) == length for c in chunks)
    assert [c[0] for c in chunks] == chunk_starts(n, length, hop)


def test_chunk_examples():
    assert chunk_starts(72) == [0, 18, 36]
    assert chunk_starts(35) == []


def test_wav_round_trip(tmp_path):
    pcm = tone()
    write_wav(tmp_path / "a.wav", pcm, 16000)
    back, sr = read_wav(tmp_path / "a.wav")
    assert sr == 16000
    np.testing.assert_array_equal(back, pcm)


def test_noise_snr():
    pcm = tone(amp=10000)
    noisy = add_noise(pcm, 10.0, np.random.default_rng(0))
    noise = noisy.astype(float) - pcm
    snr = 10 * np.log10(np.mean(pcm.astype(float) ** 2) / np.mean(noise ** 2))
    assert abs(snr - 10.0) < 0.3
