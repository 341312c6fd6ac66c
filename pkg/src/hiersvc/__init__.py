"""One-shot singing voice conversion with hierarchical speaker statistics."""
from .audio_io import AudioClip, Manifest, build_manifest, read_wav, resample, write_wav
from .network import ArchConfig, Generator, MultiScaleDiscriminator, SpeakerStats, init_params
from .trainer import TrainConfig, TrainState, overfit_single_clip, train_loop

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "Manifest", "build_manifest", "read_wav", "resample", "write_wav",
    "ArchConfig", "Generator", "MultiScaleDiscriminator", "SpeakerStats", "init_params",
    "TrainConfig", "TrainState", "overfit_single_clip", "train_loop",
]
