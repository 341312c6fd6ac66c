import numpy as np
import pytest
from scipy.io import wavfile

from hiersvc.audio_io import (AudioClip, AudioFileNotFoundError, MalformedWavError, Manifest,
                              UnsupportedEncodingError, build_manifest, read_wav, resample,
                              sample_segment, write_wav)
from conftest import tone


def test_read_pcm16_silence(tmp_path):
    path = tmp_path / "zeros.wav"
    wavfile.write(path, 16000, np.zeros(16000, dtype=np.int16))
    clip = read_wav(path)
    assert clip.sample_rate == 16000
    assert len(clip) == 16000
    assert not clip.samples.any()


def test_read_pcm16_scale(tmp_path):
    path = tmp_path / "half.wav"
    wavfile.write(path, 16000, np.full(10, 16384, dtype=np.int16))
    assert np.all(read_wav(path).samples == 0.5)


def test_float32_round_trip(tmp_path):
    path = tmp_path / "tone.wav"
    x = tone(440).samples.astype(np.float32)
    wavfile.write(path, 16000, x)
    np.testing.assert_allclose(read_wav(path).samples, x, atol=1e-6)


def test_multichannel_averaged(tmp_path):
    path = tmp_path / "stereo.wav"
    data = np.stack([np.full(100, 0.5), np.full(100, -0.25)], axis=1).astype(np.float32)
    wavfile.write(path, 8000, data)
    clip = read_wav(path)
    np.testing.assert_allclose(clip.samples, 0.125)
    assert clip.sample_rate == 8000


def test_read_errors_are_distinct(tmp_path):
    with pytest.raises(AudioFileNotFoundError):
        read_wav(tmp_path / "absent.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a riff file at all")
    with pytest.raises(MalformedWavError):
        read_wav(bad)
    u8 = tmp_path / "u8.wav"
    wavfile.write(u8, 16000, np.full(10, 128, dtype=np.uint8))
    with pytest.raises(UnsupportedEncodingError):
        read_wav(u8)


def test_write_silence_round_trip(tmp_path):
    write_wav(tmp_path / "s.wav", AudioClip(np.zeros(500), 16000))
    assert not read_wav(tmp_path / "s.wav").samples.any()


def test_write_clamps(tmp_path):
    write_wav(tmp_path / "loud.wav", AudioClip(np.array([1.5, -1.5, 0.0]), 16000))
    back = read_wav(tmp_path / "loud.wav").samples
    np.testing.assert_allclose(back, [32767 / 32768, -1.0, 0.0])


def test_write_quantization_bound(tmp_path, rng):
    x = rng.uniform(-1, 1, 4000)
    write_wav(tmp_path / "r.wav", AudioClip(x, 16000))
    assert np.max(np.abs(read_wav(tmp_path / "r.wav").samples - x)) <= 1 / 32768


def test_write_to_missing_directory(tmp_path):
    from hiersvc.audio_io import AudioError
    with pytest.raises(AudioError):
        write_wav(tmp_path / "nope" / "x.wav", AudioClip(np.zeros(3), 16000))


@pytest.mark.parametrize("src,dst,n", [(48000, 16000, 48000), (44100, 16000, 44100), (22050, 16000, 12345),
                                       (16000, 8000, 1001), (8000, 16000, 777)])
def test_resample_length(src, dst, n):
    out = resample(AudioClip(np.zeros(n), src), dst)
    assert len(out) == round(n * dst / src)
    assert out.sample_rate == dst


def test_resample_identity_is_bit_exact(rng):
    clip = AudioClip(rng.uniform(-1, 1, 1000), 16000)
    assert np.array_equal(resample(clip, 16000).samples, clip.samples)


def test_resample_preserves_tone():
    out = resample(tone(440, sr=48000), 16000)
    spec = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(len(out), 1 / 16000)
    assert abs(freqs[np.argmax(spec)] - 440) <= freqs[1]


def test_resample_rejects_bad_rate():
    with pytest.raises(ValueError):
        resample(AudioClip(np.zeros(4), 16000), 0)


def test_sample_segment_aligned(rng):
    clip = AudioClip(np.arange(32000) / 32000.0, 16000)
    for _ in range(20):
        seg = sample_segment(clip, 16000, rng)
        start = int(round(seg.samples[0] * 32000))
        assert len(seg) == 16000
        assert start % 640 == 0 and 0 <= start <= 16000
        np.testing.assert_array_equal(seg.samples, clip.samples[start:start + 16000])


def test_sample_segment_pads_short_clip(rng):
    clip = AudioClip(np.ones(8000), 16000)
    seg = sample_segment(clip, 16000, rng)
    assert np.all(seg.samples[:8000] == 1) and not seg.samples[8000:].any()


def test_sample_segment_deterministic():
    clip = AudioClip(np.random.default_rng(0).uniform(-1, 1, 50000), 16000)
    a = sample_segment(clip, 4000, np.random.default_rng(7))
    b = sample_segment(clip, 4000, np.random.default_rng(7))
    assert np.array_equal(a.samples, b.samples)


def _corpus(root, singers, files):
    for s in range(singers):
        d = root / f"s{s:02d}"
        d.mkdir(parents=True)
        for u in range(files):
            write_wav(d / f"u{u:02d}.wav", AudioClip(np.zeros(64), 16000))
    return root


def test_manifest_default_ratios_split(tmp_path):
    m = build_manifest(_corpus(tmp_path / "c", 12, 20), (0.9, 0.05, 0.05), seed=3)
    assert len(m) == 240
    for s in range(12):
        tags = [e.split for e in m if e.singer_id == f"s{s:02d}"]
        assert (tags.count("train"), tags.count("valid"), tags.count("test")) == (18, 1, 1)


def test_manifest_deterministic_and_seed_dependent(tmp_path):
    root = _corpus(tmp_path / "c", 2, 20)
    a = build_manifest(root, (0.8, 0.1, 0.1), seed=1)
    assert a == build_manifest(root, (0.8, 0.1, 0.1), seed=1)
    assert a != build_manifest(root, (0.8, 0.1, 0.1), seed=2)


def test_manifest_all_train(tmp_path):
    m = build_manifest(_corpus(tmp_path / "c", 3, 5), (1, 0, 0), seed=0)
    assert {e.split for e in m} == {"train"}


def test_manifest_small_singer_goes_to_train(tmp_path, caplog):
    m = build_manifest(_corpus(tmp_path / "c", 1, 2), (0.5, 0.25, 0.25), seed=0)
    assert {e.split for e in m} == {"train"}
    assert "all assigned to train" in caplog.text


def test_manifest_every_singer_trainable(tmp_path):
    m = build_manifest(_corpus(tmp_path / "c", 2, 4), (0.0, 0.5, 0.5), seed=0)
    for s in ("s00", "s01"):
        assert any(e.split == "train" for e in m if e.singer_id == s)


def test_manifest_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(ValueError):
        build_manifest(tmp_path / "empty")
    with pytest.raises(ValueError):
        build_manifest(_corpus(tmp_path / "c", 1, 4), (0.5, 0.5, 0.5))


def test_manifest_file_round_trip(tmp_path):
    m = build_manifest(_corpus(tmp_path / "c", 2, 6), seed=0)
    m.save(tmp_path / "m.tsv")
    line = (tmp_path / "m.tsv").read_text().splitlines()[0]
    assert len(line.split("\t")) == 4
    assert Manifest.load(tmp_path / "m.tsv") == m
