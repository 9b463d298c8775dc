# trainer.py - AdaGrad optimisation of the detection network on scene datasets

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config.run_config import OptimConfig, RunConfig, save_run_config
from models.scene import SceneDataset
from services import autodiff as ad
from services.autodiff import Tape, Tensor
from services.checkpoint import save_checkpoint
from services.errors import ConfigurationError
from services.network import LossComponents, ConductionNet, forward, total_loss

logger = logging.getLogger(__name__)

LOSS_CURVE_NAME = "loss_curve.csv"
LOSS_CURVE_FIELDS = ("epoch", "l_seg", "l_tb", "l_ib", "total")
ADAGRAD_EPS = 1e-10


@dataclass
class AdaGradState:
    lr: float = 0.05
    weight_decay: float = 0.0004
    eps: float = ADAGRAD_EPS
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    steps: int = 0


@dataclass
class EpochLoss:
    epoch: int
    l_seg: float
    l_tb: float
    l_ib: float

    @property
    def total(self) -> float:
        return self.l_seg + self.l_tb + self.l_ib


@dataclass
class FitResult:
    model: ConductionNet
    history: List[EpochLoss]
    checkpoint_path: Optional[str] = None
    curve_path: Optional[str] = None


def adagrad_update(params: Sequence[Tuple[str, Tensor]], state: AdaGradState) -> AdaGradState:
    """
    acc += g²; p -= lr·g / (sqrt(acc) + eps); then decoupled decay p -= lr·wd·p.

    Parameters without a gradient are treated as having a zero gradient.
    """
    for name, param in params:
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        acc = state.accumulators.get(name)
        if acc is None:
            acc = np.zeros_like(param.data)
        acc = acc + grad * grad
        state.accumulators[name] = acc
        previous = param.data
        updated = previous - state.lr * grad / (np.sqrt(acc) + state.eps)
        if state.weight_decay:
            updated = updated - state.lr * state.weight_decay * previous
        param.data = updated
    state.steps += 1
    return state


def flip_batch(images: np.ndarray, masks: np.ndarray, boundaries: np.ndarray,
               rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Independent random horizontal and vertical flips per sample"""
    images, masks, boundaries = images.copy(), masks.copy(), boundaries.copy()
    for i in range(images.shape[0]):
        flip_h, flip_v = rng.random(2) < 0.5
        for axis, flip in ((2, flip_h), (1, flip_v)):
            if flip:
                images[i] = np.flip(images[i], axis=axis)
                masks[i] = np.flip(masks[i], axis=axis)
                boundaries[i] = np.flip(boundaries[i], axis=axis)
    return images, masks, boundaries


def train_step(batch: Tuple[np.ndarray, np.ndarray, np.ndarray], model: ConductionNet,
               state: AdaGradState) -> Tuple[LossComponents, AdaGradState]:
    """One forward/backward pass over a batch followed by an AdaGrad update"""
    images, masks, boundaries = batch
    with Tape() as tape:
        out = forward(Tensor(images), model)
        loss, components = total_loss(out, masks, boundaries)
        tape.backward(loss)
    if not math.isfinite(components.total):
        raise ConfigurationError(f"Training diverged at step {state.steps}: loss {components.total}")
    state = adagrad_update(model.named_parameters(), state)
    model.zero_grad()
    return components, state


def write_loss_curve(history: Sequence[EpochLoss], path: str) -> str:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOSS_CURVE_FIELDS)
        for row in history:
            writer.writerow((row.epoch, repr(row.l_seg), repr(row.l_tb), repr(row.l_ib), repr(row.total)))
    return path


def read_loss_curve(path: str) -> List[EpochLoss]:
    with open(path, newline="", encoding="utf-8") as f:
        return [EpochLoss(epoch=int(r["epoch"]), l_seg=float(r["l_seg"]), l_tb=float(r["l_tb"]),
                          l_ib=float(r["l_ib"])) for r in csv.DictReader(f)]


def fit(dataset: SceneDataset, config: RunConfig, out_dir: Optional[str] = None,
        show_progress: bool = True) -> FitResult:
    """
    Train a fresh model on the dataset's train split.

    Model initialisation, shuffling and flips all derive from
    config.run.seed, so equal configs give bit-identical results.
    Writes the checkpoint, loss curve and resolved config when out_dir is set.
    """
    config.validate()
    optim: OptimConfig = config.optim
    train = dataset.subset("train")
    if len(train) == 0:
        raise ConfigurationError("Dataset has no training samples")
    images, masks, boundaries = train.arrays()
    if tuple(images.shape[2:]) != tuple(config.model.input_size):
        raise ConfigurationError(
            f"Scenes are {images.shape[2]}×{images.shape[3]} but the model expects {config.model.input_size}"
        )

    model = ConductionNet(config.model, seed=config.run.seed)
    state = AdaGradState(lr=optim.lr, weight_decay=optim.weight_decay)
    rng = np.random.default_rng([config.run.seed, 1])
    n = images.shape[0]
    logger.info(f"🚀 Training on {n} scenes for {optim.epochs} epochs "
                f"(batch {optim.batch_size}, lr {optim.lr}, tcia={config.model.use_tcia}, "
                f"tcbm={config.model.use_tcbm})")

    history: List[EpochLoss] = []
    epochs = tqdm(range(1, optim.epochs + 1), desc="train", unit="epoch", disable=not show_progress)
    for epoch in epochs:
        order = rng.permutation(n)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, optim.batch_size):
            idx = order[start:start + optim.batch_size]
            batch = (images[idx], masks[idx], boundaries[idx])
            if optim.augment_flips:
                batch = flip_batch(*batch, rng)
            components, state = train_step(batch, model, state)
            sums += (components.l_seg, components.l_tb, components.l_ib)
            batches += 1
        mean = sums / batches
        record = EpochLoss(epoch=epoch, l_seg=float(mean[0]), l_tb=float(mean[1]), l_ib=float(mean[2]))
        history.append(record)
        epochs.set_postfix(loss=f"{record.total:.4f}")
        logger.debug(f"epoch {epoch}: seg {record.l_seg:.4f} tb {record.l_tb:.4f} "
                     f"ib {record.l_ib:.4f} total {record.total:.4f}")

    result = FitResult(model=model, history=history)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        result.checkpoint_path = save_checkpoint(model, config, out_dir)
        result.curve_path = write_loss_curve(history, os.path.join(out_dir, LOSS_CURVE_NAME))
        save_run_config(config, out_dir)
    if history:
        logger.info(f"✅ Training done: loss {history[0].total:.4f} → {history[-1].total:.4f}")
    return result


def predict(model: ConductionNet, images: np.ndarray, batch_size: int = 8) -> Dict[str, np.ndarray]:
    """Sigmoid probabilities of the three heads for N×1×H×W images, without recording"""
    outputs = {"main": [], "body": [], "boundary": []}
    with ad.no_grad():
        for start in range(0, images.shape[0], batch_size):
            out = forward(Tensor(images[start:start + batch_size]), model)
            outputs["main"].append(ad.sigmoid(out.main_logits).data)
            outputs["body"].append(ad.sigmoid(out.aux_body_logits).data)
            outputs["boundary"].append(ad.sigmoid(out.aux_boundary_logits).data)
    return {key: np.concatenate(parts, axis=0) for key, parts in outputs.items()}
