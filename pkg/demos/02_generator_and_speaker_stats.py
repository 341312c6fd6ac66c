"""The generator's two streams and the hierarchical speaker statistics.

The down-sampling stream turns a reference recording into one mean vector per
block. Swapping those vectors is all it takes to change the target singer.
"""
import numpy as np
import torch

from hiersvc.features import compute_features
from hiersvc.dsp_features import harmonic_sine_excitation
from hiersvc.network import ArchConfig, init_params, parameter_count
from hiersvc.synth import sung_phrase

for name in ("tiny", "full"):
    cfg = ArchConfig.preset(name)
    gen, disc = init_params(cfg, seed=0)
    print(f"{name}: generator {parameter_count(gen):,} params, discriminator {parameter_count(disc):,}")

cfg = ArchConfig.tiny()
gen, _ = init_params(cfg, seed=0)


def tensor(a):
    return torch.from_numpy(np.asarray(a, dtype=np.float32))


source = compute_features(sung_phrase(1.0, voice="alto", seed=1))
sine = harmonic_sine_excitation(source.f0_audio_rate(), rng=np.random.default_rng(0)).values
inputs = (tensor(source.ling.T)[None], tensor(sine)[None], tensor(source.loud_audio_rate())[None, None])

with torch.no_grad():
    refs = {v: gen.speaker_stats(tensor(sung_phrase(1.0, voice=v, seed=2).samples[:16000])[None, None])[0]
            for v in ("tenor", "bright")}
    for voice, stats in refs.items():
        print(voice, "stat dims per block:", stats.dims())
    outs = {v: gen(*inputs, stats) for v, stats in refs.items()}

print("linguistic frames:", source.ling.shape[0], "-> output samples:", outs["tenor"].shape[-1])
print("L2 between outputs for the two references: %.4f"
      % torch.linalg.norm(outs["tenor"] - outs["bright"]).item())

# each up block's output carries the injected mean exactly
with torch.no_grad():
    stats = refs["tenor"]
    films_s, films_l = gen.sine_stream(inputs[1]), gen.loud_stream(inputs[2])
    x = gen.pre_conv(inputs[0])
    for k, block in enumerate(gen.up):
        target = stats.means[::-1][k]
        x = block(x, films_s[k], films_l[k], target)
        print(f"up block {k}: {tuple(x.shape[1:])}, max |mean - stat| = "
              f"{(x.mean(-1) - target).abs().max().item():.1e}")
