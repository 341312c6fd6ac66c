"""Conditioning features for one synthetic sung phrase.

Walks through pitch, harmonic excitation, loudness and content features,
printing the frame rates each one lands on.
"""
import numpy as np

from hiersvc.dsp_features import (a_weighted_loudness, extract_f0, harmonic_sine_excitation,
                                  loudness_condition)
from hiersvc.content_encoder import pseudo_encode
from hiersvc.features import upsample_track
from hiersvc.synth import sung_phrase

clip = sung_phrase(2.0, notes_hz=(220, 247, 277, 247, 196), voice="alto", seed=0)
print("audio:", len(clip), "samples at", clip.sample_rate, "Hz")

# pitch: one value every 160 samples, 0 where unvoiced
f0 = extract_f0(clip)
voiced = f0.values[f0.voiced]
print("f0 frames:", len(f0), "voiced:", f0.voiced.sum(),
      "median %.1f Hz, range %.1f-%.1f Hz" % (np.median(voiced), voiced.min(), voiced.max()))

# harmonic excitation runs at audio rate, one row per harmonic
f0_audio = upsample_track(f0.values, f0.hop, len(clip))
sine = harmonic_sine_excitation(f0_audio, rng=np.random.default_rng(0))
print("sine excitation:", sine.values.shape)
print("  voiced sample std %.3f, unvoiced sample std %.3f"
      % (sine.values[:, f0_audio > 0].std(), sine.values[:, f0_audio == 0].std()))

# A-weighted loudness every 64 samples, in dB
loud = a_weighted_loudness(clip)
print("loudness frames:", len(loud), "range %.1f to %.1f dB" % (loud.values.min(), loud.values.max()))
cond = loudness_condition(loud.values)
print("network loudness input range %.2f to %.2f" % (cond.min(), cond.max()))

# content features: 512 dims every 640 samples
ling = pseudo_encode(clip, seed=0)
print("linguistic features:", ling.values.shape,
      "per-dim mean %.1e, std %.3f" % (np.abs(ling.values.mean(0)).max(), ling.values.std(0).mean()))
