"""The training objectives on small hand-made signals."""
import numpy as np
import torch

from hiersvc.losses import (adversarial_loss, discriminator_loss, generator_total_loss,
                            linguistic_mse, multiscale_stft_loss)

t = torch.arange(16000, dtype=torch.float64) / 16000
tone = torch.sin(2 * np.pi * 440 * t)

print("stft loss, identical signals:   %.4f" % multiscale_stft_loss(tone, tone))
print("stft loss, half amplitude:      %.4f" % multiscale_stft_loss(tone, 0.5 * tone))
print("stft loss, one semitone higher: %.4f"
      % multiscale_stft_loss(tone, torch.sin(2 * np.pi * 440 * 2 ** (1 / 12) * t)))
print("stft loss, against silence:     %.4f" % multiscale_stft_loss(tone, torch.zeros_like(tone)))

maps = [torch.full((1, 1, n), 0.5) for n in (64, 32, 16)]
print("adversarial loss at D = 0.5:    %.4f" % adversarial_loss(maps))
print("discriminator loss, D = 0.5:    %.4f" % discriminator_loss(maps, maps))

c = torch.randn(25, 512, generator=torch.Generator().manual_seed(0))
print("feature mse vs. zeros:          %.4f" % linguistic_mse(c, torch.zeros_like(c)))
print("total for (0.2, 0.4, 0.1):      %.4f" % generator_total_loss(0.2, 0.4, 0.1))
