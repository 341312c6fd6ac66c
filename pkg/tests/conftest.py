import numpy as np
import pytest
import torch

from hiersvc.audio_io import AudioClip, write_wav
from hiersvc.synth import sung_phrase


def tone(freq, seconds=1.0, sr=16000, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return AudioClip(amp * np.sin(2 * np.pi * freq * t + phase), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture
def singer_dir(tmp_path):
    """Three singers with four short synthetic utterances each."""
    root = tmp_path / "corpus"
    voices = ["alto", "tenor", "bright"]
    for s, voice in enumerate(voices):
        d = root / f"singer{s}"
        d.mkdir(parents=True)
        for u in range(4):
            notes = 196.0 * 2 ** (np.array([0, 2, 4, 2]) / 12) * 2 ** ((s + u) / 12)
            write_wav(d / f"utt{u}.wav", sung_phrase(0.6, notes, voice, seed=10 * s + u))
    return root


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
