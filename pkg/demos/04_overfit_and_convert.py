"""Overfit the tiny model on one phrase, then convert it to two new singers.

A few hundred CPU steps are enough to see the loss fall and pitch carry over;
raise STEPS for cleaner audio. WAV files land in OUT_DIR.
"""
import tempfile
from pathlib import Path

import numpy as np

from hiersvc import cli
from hiersvc.audio_io import AudioClip, write_wav
from hiersvc.dsp_features import extract_f0
from hiersvc.synth import sung_phrase
from hiersvc.trainer import TrainConfig, moving_average, overfit_single_clip

STEPS = 300
OUT_DIR = Path(tempfile.mkdtemp(prefix="hiersvc_demo_"))

source = sung_phrase(1.0, voice="alto", seed=0)
result = overfit_single_clip(source, TrainConfig.tiny(), steps=STEPS)
smooth = moving_average(result.l_stft, 25)
print("stft loss: %.3f at the start, %.3f at the end" % (smooth[0], smooth[-1]))
print("feature mse: %.3f -> %.3f" % (result.l_mse[0], result.l_mse[-1]))

ckpt = OUT_DIR / "overfit.hsvc"
result.state.save(ckpt)
write_wav(OUT_DIR / "source.wav", source)
write_wav(OUT_DIR / "ref_low.wav", sung_phrase(1.0, (150, 170, 190), voice="tenor", seed=5))
write_wav(OUT_DIR / "ref_high.wav", sung_phrase(1.0, (400, 450, 500), voice="bright", seed=6))

f0_src = extract_f0(source).values
outs = {}
for name in ("ref_low", "ref_high"):
    req = cli.ConvertRequest(OUT_DIR / "source.wav", OUT_DIR / f"{name}.wav", ckpt, OUT_DIR / f"out_{name}.wav")
    outs[name] = cli.cmd_convert(req)
    f0_out = extract_f0(AudioClip(outs[name], 16000)).values
    print(f"{name}: pitch correlation with source {cli.f0_correlation(f0_out, f0_src):.3f}, "
          f"rms error {cli.f0_rmse_cents(f0_out, f0_src):.0f} cents")
print("L2 between the two conversions: %.3f" % np.linalg.norm(outs["ref_low"] - outs["ref_high"]))
print("files written to", OUT_DIR)
