"""End-to-end helpers shared by the command line and the acceptance suite."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .fileio import Checkpoint, RunConfig
from .pretext import LabeledSample, build_dataset
from .probe import (EpochStats, Standardizer, forward, hidden_features, init_model,
                    pool_clip, train)
from .seeding import derive_rng, derive_seed
from .synthgen import CorpusConfig, ShapeScene, random_scene, render


def corpus_scenes(cfg: CorpusConfig, seed: int, split: str = "train") -> dict[str, ShapeScene]:
    """Scenes of one corpus split; scene ``i`` depends only on ``(seed, split, i)``."""
    return {f"{split}-{i:04d}": random_scene(derive_rng(seed, f"scene/{split}", i), cfg)
            for i in range(cfg.n_videos)}


def render_corpus(cfg: CorpusConfig, seed: int, split: str = "train") -> dict[str, np.ndarray]:
    return {vid: render(scene) for vid, scene in corpus_scenes(cfg, seed, split).items()}


def make_split(run: RunConfig, split: str, n_samples: Optional[int] = None,
               seed: Optional[int] = None) -> list[LabeledSample]:
    """Render a corpus split and draw a labeled dataset from it."""
    seed = run.seed if seed is None else seed
    videos = render_corpus(run.corpus(), seed, split)
    n = run.n_samples if n_samples is None else n_samples
    return build_dataset(videos, n, derive_seed(seed, f"dataset/{split}"), run.catalog(), run.geometry())


def pooled_arrays(clips: Sequence[np.ndarray], grid=(4, 8, 8)) -> np.ndarray:
    if len(clips) == 0:
        return np.zeros((0, 0))
    return np.stack([pool_clip(c, tuple(grid)) for c in clips])


def sample_arrays(samples: Sequence[LabeledSample], grid=(4, 8, 8)):
    x = pooled_arrays([s.clip for s in samples], grid)
    ys = np.array([s.labels.spatial_class for s in samples], dtype=np.int64)
    yt = np.array([s.labels.temporal_class for s in samples], dtype=np.int64)
    return x, ys, yt


def fit_probe(x: np.ndarray, ys, yt, run: RunConfig, catalog_hash: str,
              seed: Optional[int] = None) -> tuple[Checkpoint, list[EpochStats]]:
    """Standardize (optionally), initialise and train a probe; return it as a checkpoint."""
    seed = run.seed if seed is None else seed
    catalog = run.catalog()
    std = Standardizer.fit(x) if run.standardize else Standardizer.identity(x.shape[1])
    model = init_model(x.shape[1], run.hidden, catalog.n_spatial, catalog.n_temporal,
                       seed=derive_seed(seed, "probe-init"))
    model, history = train(model, std(x), ys, yt, run.train_config(seed=derive_seed(seed, "probe-shuffle")))
    return Checkpoint(model, std, catalog_hash, tuple(run.pool_grid)), history


def predict(ckpt: Checkpoint, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ls, lt = forward(ckpt.model, ckpt.standardizer(x))
    return ls.argmax(axis=1), lt.argmax(axis=1)


def embed(ckpt: Checkpoint, x: np.ndarray) -> np.ndarray:
    """Hidden-layer features used for retrieval."""
    return hidden_features(ckpt.model, ckpt.standardizer(x))

