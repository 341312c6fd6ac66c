import os

import numpy as np
import pytest

from hiersvc import tensor_file
from hiersvc.audio_io import AudioClip
from hiersvc.content_encoder import (BadMagicError, DimensionMismatchError, LinguisticFeatures,
                                     TruncatedPayloadError, load_features, mel_filterbank,
                                     pseudo_encode, save_features)
from conftest import tone


def _write_raw(path, rows, cols, payload, magic=b"HSVC"):
    header = magic + np.array([1, rows, cols], dtype="<u4").tobytes()
    path.write_bytes(header.ljust(44, b"\0") + payload)


def test_load_handwritten_file(tmp_path):
    values = np.arange(25 * 512, dtype="<f4")
    _write_raw(tmp_path / "a.ling.bin", 25, 512, values.tobytes())
    feats = load_features(tmp_path / "a.ling.bin")
    assert feats.values.shape == (25, 512)
    assert feats.values[1, 0] == 512.0


def test_load_rejects_wrong_dimension(tmp_path):
    _write_raw(tmp_path / "b.bin", 25, 80, np.zeros(25 * 80, "<f4").tobytes())
    with pytest.raises(DimensionMismatchError):
        load_features(tmp_path / "b.bin")


def test_load_rejects_bad_magic_and_truncation(tmp_path):
    _write_raw(tmp_path / "m.bin", 1, 512, np.zeros(512, "<f4").tobytes(), magic=b"NOPE")
    with pytest.raises(BadMagicError):
        load_features(tmp_path / "m.bin")
    _write_raw(tmp_path / "t.bin", 2, 512, np.zeros(700, "<f4").tobytes())
    with pytest.raises(TruncatedPayloadError):
        load_features(tmp_path / "t.bin")


def test_save_size_and_round_trip(tmp_path, rng):
    zeros = LinguisticFeatures(np.zeros((25, 512)))
    save_features(tmp_path / "z.bin", zeros)
    assert os.path.getsize(tmp_path / "z.bin") == 44 + 25 * 512 * 4
    feats = LinguisticFeatures(rng.standard_normal((7, 512)))
    save_features(tmp_path / "r.bin", feats)
    back = load_features(tmp_path / "r.bin")
    assert back.values.tobytes() == feats.values.tobytes()


def test_save_overwrites_atomically(tmp_path):
    path = tmp_path / "o.bin"
    save_features(path, LinguisticFeatures(np.ones((3, 512))))
    save_features(path, LinguisticFeatures(np.zeros((2, 512))))
    assert load_features(path).values.shape == (2, 512)
    assert [p.name for p in tmp_path.iterdir()] == ["o.bin"]


def test_tensor_file_header_layout():
    blob = tensor_file.encode(np.zeros((2, 3)))
    assert blob[:4] == b"HSVC"
    assert np.frombuffer(blob[4:16], "<u4").tolist() == [1, 2, 3]
    assert blob[16:44] == b"\0" * 28


def test_pseudo_encode_shape_and_rate():
    feats = pseudo_encode(tone(220), seed=0)
    assert feats.values.shape == (25, 512)
    padded = pseudo_encode(AudioClip(np.resize(tone(220).samples, 640 * 37), 16000), seed=0)
    assert len(padded) == 37


def test_pseudo_encode_deterministic_and_seeded():
    clip = tone(300)
    a = pseudo_encode(clip, seed=5)
    assert np.array_equal(a.values, pseudo_encode(clip, seed=5).values)
    assert not np.allclose(a.values, pseudo_encode(clip, seed=6).values)


def test_pseudo_encode_normalized(rng):
    clip = AudioClip(0.3 * rng.standard_normal(32000), 16000)
    v = pseudo_encode(clip, seed=1).values.astype(np.float64)
    np.testing.assert_allclose(v.mean(axis=0), 0.0, atol=1e-4)
    np.testing.assert_allclose(v.var(axis=0), 1.0, atol=1e-4)


def test_pseudo_encode_too_short():
    with pytest.raises(ValueError):
        pseudo_encode(AudioClip(np.zeros(1000), 16000))


def test_mel_filterbank_shape():
    fb = mel_filterbank()
    assert fb.shape == (80, 1025)
    assert np.all(fb >= 0) and np.all(fb.max(axis=1) > 0)
