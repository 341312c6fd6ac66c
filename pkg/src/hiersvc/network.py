"""Generator with hierarchical speaker statistics, and the multi-scale discriminator.

Tensors are laid out (batch, channels, time). The generator owns the
up-sampling stream, the speaker (audio) down-sampling stream and the two
condition down-sampling streams (sine excitation, loudness).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn

LEAKY_SLOPE = 0.2


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    ling_dim: int = 512
    pre_channels: int = 384
    up_channels: tuple[int, ...] = (288, 192, 96, 48, 24)
    up_factors: tuple[int, ...] = (2, 4, 4, 4, 5)
    up_dilations: tuple[int, ...] = (1, 3, 9, 27)
    down_dilations: tuple[int, ...] = (1, 2, 4)
    sine_channels: int = 8
    loud_channels: int = 1
    disc_scales: int = 3
    disc_base_channels: int = 16
    disc_max_channels: int = 1024
    disc_factors: tuple[int, ...] = (4, 4, 4, 4)
    disc_min_length: int = 4096

    def __post_init__(self):
        for name in ("up_channels", "up_factors", "up_dilations", "down_dilations", "disc_factors"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if len(self.up_channels) != len(self.up_factors):
            raise ValueError("up_channels and up_factors must have the same length")
        if min(self.up_channels + self.up_factors + (self.pre_channels, self.ling_dim)) < 1:
            raise ValueError("channel counts and factors must be positive")
        c = self.disc_base_channels
        for f in self.disc_factors:
            out = min(c * f, self.disc_max_channels)
            groups = max(c // 4, 1)
            if c % groups or out % groups:
                raise ValueError("discriminator channel table incompatible with grouped convs")
            c = out

    @classmethod
    def full(cls) -> "ArchConfig":
        return cls()

    @classmethod
    def tiny(cls) -> "ArchConfig":
        return cls(pre_channels=48, up_channels=(36, 24, 12, 6, 3),
                   disc_base_channels=4, disc_max_channels=128, disc_min_length=2048)

    @classmethod
    def preset(cls, name: str) -> "ArchConfig":
        try:
            return {"full": cls.full, "tiny": cls.tiny}[name]()
        except KeyError:
            raise ValueError(f"unknown arch preset {name!r}") from None

    @property
    def hop(self) -> int:
        return math.prod(self.up_factors)

    @property
    def down_factors(self) -> tuple[int, ...]:
        """Speaker stream factors, audio side first."""
        return self.up_factors[::-1]

    @property
    def down_channels(self) -> tuple[int, ...]:
        return self.up_channels[::-1]

    @property
    def cond_factors(self) -> tuple[int, ...]:
        """Condition stream factors, audio side first; taps land on every up-block rate."""
        return (1,) + self.up_factors[::-1][:-1]

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(**d)


# --- functional building blocks -------------------------------------------

@dataclass
class FiLMOutput:
    gamma: Tensor
    xi: Tensor

    def __post_init__(self):
        if self.gamma.shape != self.xi.shape:
            raise ShapeError(f"gamma {tuple(self.gamma.shape)} vs xi {tuple(self.xi.shape)}")


def film_modulate(u: Tensor, film_f: FiLMOutput, film_l: FiLMOutput) -> Tensor:
    """(gamma_F + gamma_L) * U + xi_F + xi_L."""
    if film_f.gamma.shape != u.shape or film_l.gamma.shape != u.shape:
        raise ShapeError(f"FiLM shapes {tuple(film_f.gamma.shape)}, {tuple(film_l.gamma.shape)} "
                         f"do not match hidden {tuple(u.shape)}")
    return (film_f.gamma + film_l.gamma) * u + film_f.xi + film_l.xi


def instance_mean_normalize(h: Tensor) -> tuple[Tensor, Tensor]:
    """Remove the per-channel time mean. No variance scaling."""
    if h.shape[-1] < 1:
        raise ShapeError("instance_mean_normalize needs at least one time step")
    mu = h.mean(dim=-1)
    return h - mu.unsqueeze(-1), mu


def adain_mean(h: Tensor, mu_target: Tensor) -> Tensor:
    """Replace the per-channel time mean of `h` with `mu_target`."""
    if mu_target.shape != h.shape[:-1]:
        raise ShapeError(f"stat shape {tuple(mu_target.shape)} does not match hidden {tuple(h.shape)}")
    h0, _ = instance_mean_normalize(h)
    return h0 + mu_target.unsqueeze(-1)


def _check_rate(x: Tensor, expected: int, what: str) -> None:
    if x.shape[-1] != expected:
        raise ShapeError(f"{what}: expected length {expected}, got {x.shape[-1]}")


@dataclass
class SpeakerStats:
    """Per-block temporal means of the speaker stream, shallowest block first."""
    means: list[Tensor] = field(default_factory=list)

    def dims(self) -> tuple[int, ...]:
        return tuple(m.shape[-1] for m in self.means)

    def detach(self) -> "SpeakerStats":
        return SpeakerStats([m.detach() for m in self.means])


# --- modules ----------------------------------------------------------------

def _strided_conv(cin: int, cout: int, factor: int) -> nn.Conv1d:
    if factor == 1:
        return nn.Conv1d(cin, cout, 3, padding=1)
    return nn.Conv1d(cin, cout, 2 * factor, stride=factor, padding=(factor + 1) // 2)


class ResidualLayer(nn.Module):
    def __init__(self, channels: int, dilation: int):
        super().__init__()
        self.conv = nn.Conv1d(channels, channels, 3, dilation=dilation, padding=dilation)


class UpBlock(nn.Module):
    def __init__(self, cin: int, cout: int, factor: int, dilations: Sequence[int]):
        super().__init__()
        self.factor = factor
        pad = (factor + 1) // 2
        self.upconv = nn.ConvTranspose1d(cin, cout, 2 * factor, stride=factor, padding=pad,
                                         output_padding=2 * pad - factor)
        self.res = nn.ModuleList(ResidualLayer(cout, d) for d in dilations)

    def forward(self, h: Tensor, sine_film: FiLMOutput, loud_film: FiLMOutput, mu_target: Tensor) -> Tensor:
        x = self.upconv(F.leaky_relu(h, LEAKY_SLOPE))
        _check_rate(sine_film.gamma, x.shape[-1], "sine FiLM")
        _check_rate(loud_film.gamma, x.shape[-1], "loudness FiLM")
        for layer in self.res:
            y = F.leaky_relu(film_modulate(x, sine_film, loud_film), LEAKY_SLOPE)
            x = x + layer.conv(y)
        return adain_mean(x, mu_target)


class DownBlock(nn.Module):
    def __init__(self, cin: int, cout: int, factor: int, dilations: Sequence[int]):
        super().__init__()
        self.factor = factor
        self.conv = _strided_conv(cin, cout, factor)
        self.res = nn.ModuleList(ResidualLayer(cout, d) for d in dilations)

    def forward(self, h: Tensor) -> Tensor:
        if h.shape[-1] % self.factor:
            raise ShapeError(f"length {h.shape[-1]} not divisible by factor {self.factor}")
        x = self.conv(h)
        for layer in self.res:
            x = x + layer.conv(F.leaky_relu(x, LEAKY_SLOPE))
        return x


class SpeakerStream(nn.Module):
    """Audio -> (hierarchical mean statistics, predicted linguistic features)."""

    def __init__(self, cfg: ArchConfig):
        super().__init__()
        self.hop = cfg.hop
        chans = (1,) + cfg.down_channels
        self.down = nn.ModuleList(
            DownBlock(chans[i], chans[i + 1], f, cfg.down_dilations) for i, f in enumerate(cfg.down_factors))
        self.ling_head = nn.Conv1d(chans[-1], cfg.ling_dim, 3, padding=1)

    def forward(self, audio: Tensor) -> tuple[SpeakerStats, Tensor]:
        if audio.shape[-1] % self.hop:
            raise ShapeError(f"audio length {audio.shape[-1]} not divisible by {self.hop}")
        means = []
        x = audio
        for block in self.down:
            x, mu = instance_mean_normalize(block(x))
            means.append(mu)
        return SpeakerStats(means), self.ling_head(x)


class ConditionStream(nn.Module):
    """Audio-rate condition -> one (gamma, xi) pair per up block, deepest first."""

    def __init__(self, cfg: ArchConfig, in_channels: int):
        super().__init__()
        self.hop = cfg.hop
        chans = (in_channels,) + cfg.down_channels
        self.down = nn.ModuleList(
            DownBlock(chans[i], chans[i + 1], f, cfg.down_dilations) for i, f in enumerate(cfg.cond_factors))
        self.heads = nn.ModuleList(nn.Conv1d(c, 2 * c, 1) for c in cfg.down_channels)

    def forward(self, signal: Tensor) -> list[FiLMOutput]:
        if signal.shape[-1] % self.hop:
            raise ShapeError(f"condition length {signal.shape[-1]} not divisible by {self.hop}")
        films = []
        x = signal
        for block, head in zip(self.down, self.heads):
            x = block(x)
            gamma, xi = head(x).chunk(2, dim=1)
            films.append(FiLMOutput(gamma, xi))
        return films[::-1]


class Generator(nn.Module):
    def __init__(self, cfg: ArchConfig):
        super().__init__()
        self.cfg = cfg
        self.pre_conv = nn.Conv1d(cfg.ling_dim, cfg.pre_channels, 3, padding=1)
        chans = (cfg.pre_channels,) + cfg.up_channels
        self.up = nn.ModuleList(
            UpBlock(chans[i], chans[i + 1], f, cfg.up_dilations) for i, f in enumerate(cfg.up_factors))
        self.post_conv = nn.Conv1d(cfg.up_channels[-1], 1, 3, padding=1)
        self.speaker = SpeakerStream(cfg)
        self.sine_stream = ConditionStream(cfg, cfg.sine_channels)
        self.loud_stream = ConditionStream(cfg, cfg.loud_channels)

    def speaker_stats(self, audio: Tensor) -> tuple[SpeakerStats, Tensor]:
        """Run the speaker stream; returns stats and (B, ling_dim, T/hop) predictions."""
        return self.speaker(audio)

    def forward(self, ling: Tensor, sine: Tensor, loud: Tensor, stats: SpeakerStats) -> Tensor:
        """ling (B, ling_dim, T_ling), sine (B, K, hop*T_ling), loud (B, 1, hop*T_ling) -> (B, 1, hop*T_ling)."""
        n_audio = ling.shape[-1] * self.cfg.hop
        _check_rate(sine, n_audio, "sine excitation")
        _check_rate(loud, n_audio, "loudness")
        if stats.dims() != self.cfg.down_channels:
            raise ShapeError(f"speaker stat dims {stats.dims()} != {self.cfg.down_channels}")
        sine_films = self.sine_stream(sine)
        loud_films = self.loud_stream(loud)
        x = self.pre_conv(ling)
        deepest_first = stats.means[::-1]
        for k, block in enumerate(self.up):
            x = block(x, sine_films[k], loud_films[k], deepest_first[k])
        x = self.post_conv(F.leaky_relu(x, LEAKY_SLOPE))
        return torch.tanh(x)


class SubDiscriminator(nn.Module):
    def __init__(self, base: int, max_channels: int, factors: Sequence[int]):
        super().__init__()
        layers = [nn.Conv1d(1, base, 15, padding=7)]
        c = base
        for f in factors:
            out = min(c * f, max_channels)
            layers.append(nn.Conv1d(c, out, 10 * f + 1, stride=f, padding=5 * f, groups=max(c // 4, 1)))
            c = out
        layers.append(nn.Conv1d(c, c, 5, padding=2))
        layers.append(nn.Conv1d(c, 1, 3, padding=1))
        self.layers = nn.ModuleList(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = F.leaky_relu(layer(x), LEAKY_SLOPE)
        return self.layers[-1](x)


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, cfg: ArchConfig):
        super().__init__()
        self.min_length = cfg.disc_min_length
        self.subs = nn.ModuleList(
            SubDiscriminator(cfg.disc_base_channels, cfg.disc_max_channels, cfg.disc_factors)
            for _ in range(cfg.disc_scales))

    def forward(self, audio: Tensor) -> list[Tensor]:
        if audio.shape[-1] < self.min_length:
            raise ShapeError(f"discriminator input of {audio.shape[-1]} samples is shorter "
                             f"than {self.min_length}")
        scores = []
        x = audio
        for k, sub in enumerate(self.subs):
            if k:
                x = F.avg_pool1d(x, 4, stride=2, padding=1, count_include_pad=False)
            scores.append(sub(x))
        return scores


def _fan_in(module: nn.Module) -> float:
    w = module.weight
    if isinstance(module, nn.ConvTranspose1d):
        # each output sample sees in_channels * kernel/stride taps
        return w.shape[0] * w.shape[2] / module.stride[0]
    return w.shape[1] * w.shape[2]


FILM_HEAD_GAIN = 0.1


@torch.no_grad()
def reset_parameters(model: nn.Module, generator: torch.Generator) -> nn.Module:
    """Weights ~ N(0, 1/fan_in), biases zero, in module registration order.

    FiLM heads are scaled down by FILM_HEAD_GAIN so the multiplicative
    path starts near zero instead of compounding through the residual stacks.
    """
    heads = {id(h) for s in model.modules() if isinstance(s, ConditionStream) for h in s.heads}
    for module in model.modules():
        if isinstance(module, (nn.Conv1d, nn.ConvTranspose1d)):
            std = 1.0 / math.sqrt(_fan_in(module))
            if id(module) in heads:
                std *= FILM_HEAD_GAIN
            module.weight.copy_(torch.randn(module.weight.shape, generator=generator) * std)
            if module.bias is not None:
                module.bias.zero_()
    return model


def init_params(cfg: ArchConfig, seed: int = 0) -> tuple[Generator, MultiScaleDiscriminator]:
    g = torch.Generator().manual_seed(int(seed))
    gen = reset_parameters(Generator(cfg), g)
    disc = reset_parameters(MultiScaleDiscriminator(cfg), g)
    return gen, disc


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
