"""Training objectives: least-squares GAN terms, multi-scale STFT loss, feature MSE."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import torch
from torch import Tensor

FFT_SIZES = (2048, 1024, 512, 256, 128, 64)
MAG_FLOOR = 1e-7
ALPHA = 2.5
BETA = 2.5


class LossError(ValueError):
    pass


@dataclass
class LossReport:
    l_stft: float = 0.0
    l_adv: float = 0.0
    l_mse: float = 0.0
    l_total: float = 0.0
    l_disc: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _check_maps(maps: Sequence[Tensor], what: str) -> None:
    if len(maps) == 0:
        raise LossError(f"{what}: no score maps")
    for m in maps:
        if m.numel() == 0:
            raise LossError(f"{what}: empty score map")


def adversarial_loss(fake_scores: Sequence[Tensor]) -> Tensor:
    """Mean over sub-discriminators of mean((1 - D_k(x_hat))^2)."""
    _check_maps(fake_scores, "adversarial_loss")
    return sum(((1.0 - s) ** 2).mean() for s in fake_scores) / len(fake_scores)


def discriminator_loss(real_scores: Sequence[Tensor], fake_scores: Sequence[Tensor]) -> Tensor:
    """Mean over sub-discriminators of mean((1 - D_k(x))^2) + mean(D_k(x_hat)^2)."""
    if len(real_scores) != len(fake_scores):
        raise LossError(f"{len(real_scores)} real vs {len(fake_scores)} fake score maps")
    _check_maps(real_scores, "discriminator_loss")
    _check_maps(fake_scores, "discriminator_loss")
    terms = [((1.0 - r) ** 2).mean() + (f ** 2).mean() for r, f in zip(real_scores, fake_scores)]
    return sum(terms) / len(terms)


def stft_magnitude(x: Tensor, n_fft: int) -> Tensor:
    """|STFT| with Hann window, hop n_fft/4, centered reflect-padded frames, floored at 1e-7."""
    window = torch.hann_window(n_fft, dtype=x.dtype, device=x.device)
    spec = torch.stft(x, n_fft, hop_length=n_fft // 4, win_length=n_fft, window=window,
                      center=True, pad_mode="reflect", return_complex=True)
    power = spec.real ** 2 + spec.imag ** 2
    return torch.sqrt(torch.clamp(power, min=MAG_FLOOR ** 2))


def multiscale_stft_loss(x: Tensor, x_hat: Tensor, fft_sizes: Sequence[int] = FFT_SIZES) -> Tensor:
    """Spectral convergence + mean absolute log-magnitude error, averaged over FFT sizes.

    `x` and `x_hat` are (T,) or (B, T); batch items are averaged.
    """
    if x.shape != x_hat.shape:
        raise LossError(f"length mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    if x.shape[-1] < max(fft_sizes):
        raise LossError(f"signal of {x.shape[-1]} samples shorter than FFT size {max(fft_sizes)}")
    x = x.reshape(-1, x.shape[-1])
    x_hat = x_hat.reshape(-1, x_hat.shape[-1])
    total = x.new_zeros(())
    for m in fft_sizes:
        s, s_hat = stft_magnitude(x, m), stft_magnitude(x_hat, m)
        sc = torch.linalg.norm(s - s_hat, dim=(-2, -1)) / torch.linalg.norm(s, dim=(-2, -1))
        log_l1 = (torch.log(s) - torch.log(s_hat)).abs().mean(dim=(-2, -1))
        total = total + (sc + log_l1).mean()
    return total / len(fft_sizes)


def linguistic_mse(c: Tensor, c_hat: Tensor) -> Tensor:
    if c.shape != c_hat.shape:
        raise LossError(f"shape mismatch: {tuple(c.shape)} vs {tuple(c_hat.shape)}")
    return ((c - c_hat) ** 2).mean()


def generator_total_loss(l_stft, l_adv, l_mse, alpha: float = ALPHA, beta: float = BETA):
    """l_stft + alpha * l_adv + beta * l_mse (works on floats and tensors)."""
    for name, v in (("l_stft", l_stft), ("l_adv", l_adv), ("l_mse", l_mse)):
        if not math.isfinite(float(v.detach() if isinstance(v, torch.Tensor) else v)):
            raise LossError(f"non-finite {name}: {float(v)}")
    return l_stft + alpha * l_adv + beta * l_mse
