"""Adversarial training loop, checkpointing and metrics logging."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch

from . import checkpoint
from .audio_io import LING_HOP, SAMPLE_RATE, AudioClip, Manifest, load_audio, segment_start
from .dsp_features import NUM_HARMONICS, harmonic_sine_excitation
from .features import UtteranceFeatures, compute_features, load_utterance_features
from .losses import (LossError, LossReport, adversarial_loss, discriminator_loss,
                     generator_total_loss, linguistic_mse, multiscale_stft_loss)
from .network import ArchConfig, Generator, MultiScaleDiscriminator, init_params

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("step", "lr", "l_stft", "l_adv", "l_mse", "l_total", "l_disc")


class NonFiniteLossError(LossError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 32
    segment_seconds: float = 1.0
    lr_initial: float = 0.001
    lr_halving_interval: int = 100_000
    disc_start_step: int = 100_000
    alpha: float = 2.5
    beta: float = 2.5
    total_steps: int = 400_000
    seed: int = 0
    arch: str = "full"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 0.0
    checkpoint_every: int = 10_000
    pseudo_encoder: bool = True
    pseudo_seed: int = 0

    def __post_init__(self):
        for f in ("batch_size", "segment_seconds", "lr_initial", "lr_halving_interval",
                  "adam_eps", "checkpoint_every"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")
        if min(self.total_steps, self.disc_start_step, self.alpha, self.beta, self.grad_clip) < 0:
            raise ValueError("step counts, loss weights and grad_clip must be non-negative")
        if self.segment_samples < LING_HOP:
            raise ValueError("segment shorter than one linguistic frame")
        if self.disc_start_step > self.total_steps:
            logger.warning("disc_start_step %d > total_steps %d: discriminator never trains",
                           self.disc_start_step, self.total_steps)
        ArchConfig.preset(self.arch)

    @classmethod
    def tiny(cls, **overrides) -> "TrainConfig":
        base = dict(batch_size=2, segment_seconds=0.25, arch="tiny", total_steps=2000,
                    lr_halving_interval=1000, disc_start_step=1000, checkpoint_every=500)
        base.update(overrides)
        return cls(**base)

    @property
    def segment_samples(self) -> int:
        """Segment length rounded down to whole linguistic frames."""
        return int(self.segment_seconds * SAMPLE_RATE) // LING_HOP * LING_HOP

    @property
    def arch_config(self) -> ArchConfig:
        return ArchConfig.preset(self.arch)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Flat ``key = value`` text; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = (p.strip() for p in line.partition("="))
                if not sep or key not in types:
                    raise ValueError(f"{path}:{lineno}: unknown or malformed entry {raw.strip()!r}")
                values[key] = _parse_value(types[key], value)
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_dict().items())


def _parse_value(type_name, text: str):
    type_name = getattr(type_name, "__name__", type_name)
    if type_name == "bool":
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"bad boolean {text!r}")
        return text.lower() in ("true", "1", "yes")
    if type_name == "int":
        return int(float(text)) if "e" in text.lower() else int(text.replace("_", ""))
    if type_name == "float":
        return float(text)
    return text


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    return cfg.lr_initial * 0.5 ** (step // cfg.lr_halving_interval)


# --- data ---------------------------------------------------------------

@dataclass
class TrainingBatch:
    audio: torch.Tensor  # (B, 1, S)
    ling: torch.Tensor   # (B, 512, S/640)
    sine: torch.Tensor   # (B, K, S)
    loud: torch.Tensor   # (B, 1, S)

    def __len__(self) -> int:
        return self.audio.shape[0]


class FeatureStore:
    """Lazily loads and caches per-utterance features for a manifest."""

    def __init__(self, manifest: Manifest, features_dir=None, pseudo_encoder: bool = True,
                 pseudo_seed: int = 0, split: str = "train"):
        self.entries = manifest.split(split) or list(manifest)
        if not self.entries:
            raise ValueError("manifest has no entries")
        self.features_dir = features_dir
        self.pseudo_seed = pseudo_seed if pseudo_encoder else None
        self._cache: dict[str, UtteranceFeatures] = {}

    @classmethod
    def from_clips(cls, clips: dict[str, UtteranceFeatures]) -> "FeatureStore":
        store = cls.__new__(cls)
        store.entries = sorted(clips)
        store.features_dir = None
        store.pseudo_seed = 0
        store._cache = dict(clips)
        return store

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, index: int) -> UtteranceFeatures:
        entry = self.entries[index]
        key = entry if isinstance(entry, str) else entry.utterance_id
        if key not in self._cache:
            clip = load_audio(entry.path, SAMPLE_RATE)
            self._cache[key] = load_utterance_features(self.features_dir, key, clip, self.pseudo_seed)
        return self._cache[key]

    def preload(self) -> None:
        for i in range(len(self)):
            self.get(i)


def _slice_padded(x: np.ndarray, start: int, length: int) -> np.ndarray:
    piece = x[start:start + length]
    if len(piece) < length:
        pad = [(0, length - len(piece))] + [(0, 0)] * (x.ndim - 1)
        piece = np.pad(piece, pad)
    return piece


def make_batch(store: FeatureStore, cfg: TrainConfig, rng: np.random.Generator) -> TrainingBatch:
    """Random hop-aligned segments with aligned linguistic, sine and loudness conditions."""
    seg = cfg.segment_samples
    audio, ling, sine, loud = [], [], [], []
    for _ in range(cfg.batch_size):
        feats = store.get(int(rng.integers(len(store))))
        start = segment_start(feats.num_samples, seg, rng)
        audio.append(_slice_padded(feats.audio, start, seg))
        ling.append(_slice_padded(feats.ling, start // LING_HOP, seg // LING_HOP).T)
        f0 = _slice_padded(feats.f0_audio_rate(), start, seg)
        sine.append(harmonic_sine_excitation(f0, NUM_HARMONICS, SAMPLE_RATE, rng).values)
        loud_seg = feats.loud_audio_rate()[start:start + seg]
        loud.append(np.pad(loud_seg, (0, seg - len(loud_seg))))

    def stack(xs):
        return torch.from_numpy(np.stack(xs).astype(np.float32))

    return TrainingBatch(stack(audio)[:, None], stack(ling), stack(sine), stack(loud)[:, None])


def batch_rng(seed: int, step: int) -> np.random.Generator:
    """Independent data stream per step, so resumed runs replay the same batches."""
    return np.random.default_rng([seed, step])


# --- state ----------------------------------------------------------------

@dataclass
class TrainState:
    cfg: TrainConfig
    gen: Generator
    disc: MultiScaleDiscriminator
    opt_gen: torch.optim.Adam
    opt_disc: torch.optim.Adam
    step: int = 0
    history: list[LossReport] = field(default_factory=list)

    @classmethod
    def create(cls, cfg: TrainConfig) -> "TrainState":
        gen, disc = init_params(cfg.arch_config, cfg.seed)
        return cls(cfg, gen, disc, _adam(gen, cfg), _adam(disc, cfg))

    # checkpoint round trip
    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, model, opt in (("gen", self.gen, self.opt_gen), ("disc", self.disc, self.opt_disc)):
            for name, p in model.named_parameters():
                out[f"{prefix}.{name}"] = p.detach().numpy().copy()
                st = opt.state.get(p)
                if st:
                    out[f"opt.{prefix}.{name}.exp_avg"] = st["exp_avg"].numpy().copy()
                    out[f"opt.{prefix}.{name}.exp_avg_sq"] = st["exp_avg_sq"].numpy().copy()
        return out

    def meta(self) -> dict:
        opt_steps = {}
        for prefix, opt in (("gen", self.opt_gen), ("disc", self.opt_disc)):
            steps = {float(s["step"]) for s in opt.state.values()}
            opt_steps[prefix] = steps.pop() if steps else 0.0
        return {"step": self.step, "arch": self.cfg.arch_config.to_dict(),
                "train_config": self.cfg.to_dict(), "optimizer_steps": opt_steps}

    def save(self, path) -> None:
        checkpoint.save(path, self.tensors(), self.meta())

    @classmethod
    def load(cls, path, cfg: TrainConfig | None = None) -> "TrainState":
        tensors, meta = checkpoint.load(path)
        stored_cfg = TrainConfig(**meta["train_config"])
        cfg = cfg or stored_cfg
        if cfg.arch_config != ArchConfig.from_dict(meta["arch"]):
            raise checkpoint.CheckpointError(f"{path}: architecture does not match config")
        state = cls.create(cfg)
        state.step = int(meta["step"])
        for prefix, model, opt in (("gen", state.gen, state.opt_gen), ("disc", state.disc, state.opt_disc)):
            with torch.no_grad():
                for name, p in model.named_parameters():
                    key = f"{prefix}.{name}"
                    if key not in tensors:
                        raise checkpoint.CheckpointError(f"{path}: missing tensor {key}")
                    p.copy_(torch.from_numpy(tensors[key]))
                    if f"opt.{key}.exp_avg" in tensors:
                        opt.state[p] = {
                            "step": torch.tensor(meta["optimizer_steps"][prefix]),
                            "exp_avg": torch.from_numpy(tensors[f"opt.{key}.exp_avg"].copy()),
                            "exp_avg_sq": torch.from_numpy(tensors[f"opt.{key}.exp_avg_sq"].copy()),
                        }
        return state


def _adam(model: torch.nn.Module, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.lr_initial,
                            betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps)


def load_generator(path) -> tuple[Generator, dict]:
    """Generator weights and metadata from a checkpoint (discriminator ignored)."""
    tensors, meta = checkpoint.load(path)
    arch = ArchConfig.from_dict(meta["arch"])
    gen = Generator(arch)
    with torch.no_grad():
        for name, p in gen.named_parameters():
            key = f"gen.{name}"
            if key not in tensors:
                raise checkpoint.CheckpointError(f"{path}: missing tensor {key}")
            p.copy_(torch.from_numpy(tensors[key]))
    return gen, meta


# --- steps ----------------------------------------------------------------

def _finite(name: str, value: torch.Tensor) -> None:
    if not torch.isfinite(value).all():
        raise NonFiniteLossError(f"non-finite {name}: {value.item()}")


def train_step(state: TrainState, batch: TrainingBatch) -> LossReport:
    """One generator update (and one discriminator update once it has joined)."""
    cfg = state.cfg
    lr = lr_schedule(state.step, cfg)
    use_disc = state.step >= cfg.disc_start_step

    stats, ling_hat = state.gen.speaker_stats(batch.audio)
    l_mse = linguistic_mse(batch.ling, ling_hat)
    x_hat = state.gen(batch.ling, batch.sine, batch.loud, stats)
    l_stft = multiscale_stft_loss(batch.audio[:, 0], x_hat[:, 0])
    l_adv = adversarial_loss(state.disc(x_hat)) if use_disc else torch.zeros(())
    for name, v in (("l_stft", l_stft), ("l_mse", l_mse), ("l_adv", l_adv)):
        _finite(name, v)
    l_total = generator_total_loss(l_stft, l_adv, l_mse, cfg.alpha, cfg.beta)

    for group in state.opt_gen.param_groups:
        group["lr"] = lr
    state.opt_gen.zero_grad(set_to_none=True)
    l_total.backward()
    if cfg.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(state.gen.parameters(), cfg.grad_clip)
    state.opt_gen.step()

    l_disc = 0.0
    if use_disc:
        state.opt_disc.zero_grad(set_to_none=True)
        loss_d = discriminator_loss(state.disc(batch.audio), state.disc(x_hat.detach()))
        _finite("l_disc", loss_d)
        for group in state.opt_disc.param_groups:
            group["lr"] = lr
        loss_d.backward()
        if cfg.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(state.disc.parameters(), cfg.grad_clip)
        state.opt_disc.step()
        l_disc = loss_d.item()
    state.opt_disc.zero_grad(set_to_none=True)

    state.step += 1
    return LossReport(l_stft.item(), l_adv.item(), l_mse.item(), l_total.item(), l_disc)


def iterate_steps(state: TrainState, store: FeatureStore, until: int) -> Iterator[tuple[int, float, LossReport]]:
    while state.step < until:
        step = state.step
        batch = make_batch(store, state.cfg, batch_rng(state.cfg.seed, step))
        report = train_step(state, batch)
        yield step, lr_schedule(step, state.cfg), report


def train_loop(cfg: TrainConfig, manifest: Manifest, out_dir, features_dir=None,
               resume=None, echo=None) -> Path:
    """Train to ``cfg.total_steps`` writing checkpoints and ``metrics.csv`` into `out_dir`.

    Returns the path of the final checkpoint.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = TrainState.load(resume, cfg) if resume else TrainState.create(cfg)
    store = FeatureStore(manifest, features_dir, cfg.pseudo_encoder, cfg.pseudo_seed)
    store.preload()

    log_path = out_dir / "metrics.csv"
    fresh = not (resume and log_path.exists())
    with open(log_path, "w" if fresh else "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(METRIC_FIELDS)
        for step, lr, rep in iterate_steps(state, store, cfg.total_steps):
            row = [step, lr, rep.l_stft, rep.l_adv, rep.l_mse, rep.l_total, rep.l_disc]
            writer.writerow(row)
            fh.flush()
            if echo is not None:
                echo(",".join(str(v) for v in row))
            if state.step % cfg.checkpoint_every == 0:
                state.save(out_dir / f"ckpt_{state.step:08d}.hsvc")
    final = out_dir / "final.hsvc"
    state.save(final)
    return final


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


# --- single-clip overfitting ----------------------------------------------

@dataclass
class OverfitResult:
    l_stft: np.ndarray
    l_mse: np.ndarray
    state: TrainState


def overfit_single_clip(clip: AudioClip, cfg: TrainConfig | None = None,
                        steps: int | None = None) -> OverfitResult:
    """Train on one clip with the discriminator disabled; returns the loss curves."""
    cfg = cfg or TrainConfig.tiny()
    steps = cfg.total_steps if steps is None else steps
    cfg = dataclasses.replace(cfg, total_steps=steps, disc_start_step=steps)
    if len(clip) < cfg.segment_samples:
        raise ValueError(f"clip of {len(clip)} samples shorter than segment {cfg.segment_samples}")
    store = FeatureStore.from_clips({"clip": compute_features(clip, pseudo_seed=cfg.pseudo_seed)})
    state = TrainState.create(cfg)
    l_stft, l_mse = [], []
    for _, _, rep in iterate_steps(state, store, steps):
        l_stft.append(rep.l_stft)
        l_mse.append(rep.l_mse)
    return OverfitResult(np.array(l_stft), np.array(l_mse), state)


def moving_average(x: Sequence[float], window: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if len(x) < window:
        return np.array([])
    c = np.cumsum(np.insert(x, 0, 0.0))
    return (c[window:] - c[:-window]) / window


def is_finite_report(rep: LossReport) -> bool:
    return all(math.isfinite(v) for v in rep.as_dict().values())
