# data_synth.py - Deterministic synthetic infrared small-target scenes and dataset folders

import csv
import logging
import math
import os
from typing import List, Sequence, Tuple, TypeVar

import cv2
import numpy as np
from skimage import measure

from models.scene import SceneDataset, SceneMeta, SceneSample, SynthConfig
from services.errors import ConfigurationError
from services.image_io import load_image, load_mask, save_image, save_mask

logger = logging.getLogger(__name__)

T = TypeVar("T")

MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("id", "seed", "n_targets", "split")
SYNTH_CONFIG_NAME = "synth_config.ini"
MAX_PLACEMENT_ATTEMPTS = 200
# ellipse {g >= 1/2} of a unit-peak Gaussian covers 2*pi*ln2 * sigma_a * sigma_b
_HALF_LEVEL_AREA = 2.0 * math.pi * math.log(2.0)
_CROSS = cv2.getStructuringElement(cv2.MORPH_CROSS, (3, 3))
_SQUARE = np.ones((3, 3), dtype=np.uint8)


def _dilate(mask: np.ndarray, kernel: np.ndarray, iterations: int = 1) -> np.ndarray:
    return cv2.dilate(mask.astype(np.uint8), kernel, iterations=iterations,
                      borderType=cv2.BORDER_CONSTANT, borderValue=0) > 0


def _erode(mask: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return cv2.erode(mask.astype(np.uint8), kernel,
                     borderType=cv2.BORDER_CONSTANT, borderValue=0) > 0


def make_boundary(mask: np.ndarray) -> np.ndarray:
    """Morphological gradient: 3×3-cross dilation minus erosion (outside the image counts as background)"""
    mask = np.asarray(mask) > 0
    return _dilate(mask, _CROSS) & ~_erode(mask, _CROSS)


def _smooth_background(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    height, width = config.image_size
    grid = config.background_grid
    coarse = rng.uniform(-1.0, 1.0, size=(grid + 1, grid + 1))
    smooth = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)
    return config.background_level + config.background_amplitude * smooth


def _gaussian(rows: np.ndarray, cols: np.ndarray, center: Tuple[float, float],
              sigmas: Tuple[float, float], angle: float) -> np.ndarray:
    dr, dc = rows - center[0], cols - center[1]
    cos, sin = math.cos(angle), math.sin(angle)
    u = cos * dr + sin * dc
    v = -sin * dr + cos * dc
    return np.exp(-0.5 * ((u / sigmas[0]) ** 2 + (v / sigmas[1]) ** 2))


def generate(config: SynthConfig, seed: int) -> SceneSample:
    """
    One scene as a pure function of (config, seed).

    Background is a smooth random field plus broad clutter blobs and
    Gaussian noise. Each target is an anisotropic Gaussian whose
    half-peak region becomes its mask; targets never touch each other.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    height, width = config.image_size
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)

    image = _smooth_background(config, rng)
    for _ in range(int(rng.integers(config.clutter_count[0], config.clutter_count[1] + 1))):
        center = (rng.uniform(0, height - 1), rng.uniform(0, width - 1))
        sigma = rng.uniform(*config.clutter_sigma)
        image = image + rng.uniform(*config.clutter_amplitude) * _gaussian(rows, cols, center, (sigma, sigma), 0.0)

    mask = np.zeros((height, width), dtype=bool)
    meta = SceneMeta(seed=seed, n_targets=0, background={
        "level": config.background_level,
        "amplitude": config.background_amplitude,
        "noise_sigma": config.noise_sigma,
    })
    area_low, area_high = config.target_area
    n_targets = int(rng.integers(config.target_count[0], config.target_count[1] + 1))
    for index in range(n_targets):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            area = rng.uniform(area_low, area_high)
            aspect = rng.uniform(1.0, 2.0)
            angle = rng.uniform(0.0, math.pi)
            minor = math.sqrt(area / _HALF_LEVEL_AREA / aspect)
            sigmas = (minor * aspect, minor)
            center = (rng.uniform(config.margin, height - 1 - config.margin),
                      rng.uniform(config.margin, width - 1 - config.margin))
            blob = _gaussian(rows, cols, center, sigmas, angle)
            blob_mask = blob >= 0.5
            count = int(blob_mask.sum())
            if not area_low <= count <= area_high:
                continue
            if measure.label(blob_mask, connectivity=2).max() != 1:
                continue
            if np.any(blob_mask & _dilate(mask, _SQUARE, iterations=2)):
                continue
            break
        else:
            raise ConfigurationError(
                f"Could not place target {index + 1}/{n_targets} in {config.image_size} "
                f"after {MAX_PLACEMENT_ATTEMPTS} attempts; targets cannot fit"
            )
        image = image + rng.uniform(*config.contrast) * blob
        mask |= blob_mask
        meta.centers.append(center)
        meta.radii.append(sigmas)
        meta.areas.append(count)

    meta.n_targets = len(meta.areas)
    image = image + rng.normal(0.0, config.noise_sigma, size=(height, width))
    image = np.clip(image, 0.0, 1.0)
    return SceneSample(image=image, mask=mask, boundary_mask=make_boundary(mask), meta=meta)


def split(items: Sequence[T], ratio: float = 0.8, seed: int = 0) -> Tuple[List[T], List[T]]:
    """Seeded train/test split; both parts keep the original order"""
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"split ratio must lie in (0, 1), got {ratio}")
    n_train = int(round(ratio * len(items)))
    order = np.random.default_rng(seed).permutation(len(items))
    train_idx = set(order[:n_train].tolist())
    train = [item for i, item in enumerate(items) if i in train_idx]
    test = [item for i, item in enumerate(items) if i not in train_idx]
    return train, test


def sample_seeds(seed: int, n: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def generate_dataset(config: SynthConfig, n: int, seed: int, ratio: float = 0.8) -> SceneDataset:
    if n < 1:
        raise ConfigurationError(f"dataset size must be >= 1, got {n}")
    seeds = sample_seeds(seed, n)
    ids = [f"{i:06d}" for i in range(n)]
    train_ids, _ = split(ids, ratio, config.split_seed)
    train_ids = set(train_ids)
    samples = [generate(config, s) for s in seeds]
    splits = ["train" if i in train_ids else "test" for i in ids]
    return SceneDataset(samples=samples, ids=ids, splits=splits)


def write_dataset(dataset: SceneDataset, config: SynthConfig, out_dir: str) -> str:
    """Write images/, masks/, boundaries/, the manifest and the generation config"""
    from config.run_config import RunConfig, save_run_config

    for sub in ("images", "masks", "boundaries"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    for sample_id, sample in zip(dataset.ids, dataset.samples):
        save_image(os.path.join(out_dir, "images", f"{sample_id}.pgm"), sample.image)
        save_mask(os.path.join(out_dir, "masks", f"{sample_id}.png"), sample.mask)
        save_mask(os.path.join(out_dir, "boundaries", f"{sample_id}.png"), sample.boundary_mask)

    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for sample_id, sample, part in zip(dataset.ids, dataset.samples, dataset.splits):
            writer.writerow((sample_id, sample.meta.seed, sample.meta.n_targets, part))

    save_run_config(RunConfig(synth=config), os.path.join(out_dir, SYNTH_CONFIG_NAME))
    logger.info(f"✅ Wrote {len(dataset)} scenes to {out_dir}")
    return manifest_path


def read_manifest(data_dir: str) -> List[dict]:
    path = os.path.join(data_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ConfigurationError(f"No {MANIFEST_NAME} in {data_dir}")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        if set(row) != set(MANIFEST_FIELDS):
            raise ConfigurationError(f"Malformed manifest row in {path}: {row}")
        if row["split"] not in ("train", "test"):
            raise ConfigurationError(f"Unknown split {row['split']!r} in {path}")
    return rows


def load_dataset(data_dir: str, use_float_images: bool = True) -> SceneDataset:
    """
    Load a dataset folder.

    With use_float_images, scenes are regenerated from their seeds and
    the stored generation config, giving the pre-quantization floats;
    otherwise the 8-bit files are read.
    """
    from config.run_config import load_run_config

    rows = read_manifest(data_dir)
    config = load_run_config(os.path.join(data_dir, SYNTH_CONFIG_NAME)).synth
    samples = []
    for row in rows:
        seed = int(row["seed"])
        if use_float_images:
            samples.append(generate(config, seed))
            continue
        mask = load_mask(os.path.join(data_dir, "masks", f"{row['id']}.png"))
        samples.append(SceneSample(
            image=load_image(os.path.join(data_dir, "images", f"{row['id']}.pgm")),
            mask=mask,
            boundary_mask=load_mask(os.path.join(data_dir, "boundaries", f"{row['id']}.png")),
            meta=SceneMeta(seed=seed, n_targets=int(row["n_targets"])),
        ))
    logger.info(f"Loaded {len(samples)} scenes from {data_dir} (float images: {use_float_images})")
    return SceneDataset(samples=samples, ids=[r["id"] for r in rows], splits=[r["split"] for r in rows])
