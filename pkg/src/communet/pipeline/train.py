"""Training loop with per-batch SNR randomisation.

Every random draw is keyed by ``(seed, epoch, batch)``, so a run resumed from
a checkpoint at step ``k`` replays exactly the batches an uninterrupted run
would have seen from step ``k`` on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..channel import make_rng
from ..gridmap import from_output_grid, grid_spec_for, to_input_grid, to_target_grid
from ..losses import ber, loss_by_name
from ..nn.autograd import Tape
from ..nn.unet import build_unet
from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import gen_dataset, transmit
from .optim import Adam

log = logging.getLogger(__name__)

SHUFFLE_STREAM = 2
NOISE_STREAM = 3


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    mean_loss: float
    mean_batch_ber: float


def batches_per_epoch(cfg: TrainConfig) -> int:
    return math.ceil(cfg.num_samples / cfg.batch_size)


def initial_checkpoint(cfg: TrainConfig) -> Checkpoint:
    grid = grid_spec_for(cfg.block_length, cfg.code.memory, cfg.net.depth)
    model = build_unet(cfg.net, cfg.seed)
    params = {k: v.copy() for k, v in model.state_dict().items()}
    moments = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.items()}
    return Checkpoint(cfg, grid, params, moments, step=0)


def train(
    cfg: TrainConfig,
    resume: Checkpoint | None = None,
    stop_after: int | None = None,
    on_epoch: Callable[[EpochLog], None] | None = None,
) -> tuple[Checkpoint, list[EpochLog]]:
    """Train a U-Net decoder from ``cfg``.

    Parameters
    ----------
    resume : Checkpoint, optional
        Continue from this state instead of a fresh initialisation.
    stop_after : int, optional
        Stop once the global step counter reaches this value.
    on_epoch : callable, optional
        Called with each completed epoch's log row.

    Returns
    -------
    (Checkpoint, list of EpochLog)
        Only epochs that finish inside this call are logged; an epoch
        resumed midway is averaged over the batches run here.
    """
    start = resume if resume is not None else initial_checkpoint(cfg)
    if start.config != cfg:
        raise ValueError("checkpoint was produced by a different config")
    gs = start.grid
    model = build_unet(cfg.net, cfg.seed)
    model.load_state_dict(start.params)
    opt = Adam(model.params, lr=cfg.lr)
    opt.step_count = start.step
    for name, (m, v) in start.moments.items():
        opt.moments[name] = (m.astype(np.float32), v.astype(np.float32))

    loss_fn = loss_by_name(cfg.loss)
    msgs = gen_dataset(cfg.code, cfg.block_length, cfg.num_samples, cfg.seed)
    target_mask = gs.target_mask
    per_epoch = batches_per_epoch(cfg)
    total = cfg.epochs * per_epoch
    end = total if stop_after is None else min(total, stop_after)

    logs = []
    losses, bers = [], []
    perm, perm_epoch = None, -1
    for step in range(start.step, end):
        epoch, b = divmod(step, per_epoch)
        if epoch != perm_epoch:
            perm = make_rng(cfg.seed, SHUFFLE_STREAM, epoch).permutation(cfg.num_samples)
            perm_epoch = epoch
        batch = msgs[perm[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
        rng = make_rng(cfg.seed, NOISE_STREAM, epoch, b)
        snr = rng.uniform(cfg.snr_min_db, cfg.snr_max_db)
        received = transmit(cfg.code, batch, snr, rng)
        x = to_input_grid(received, gs).astype(np.float32)
        target = to_target_grid(batch, gs).astype(np.float32)

        opt.zero_grad()
        with Tape() as tape:
            p = model.forward(x)
            loss = loss_fn(p, target, target_mask)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(f"non-finite loss {value} at step {step + 1} (batch SNR {snr:.3f} dB)")
        tape.backward(loss)
        opt.step()

        losses.append(value)
        bers.append(ber(from_output_grid(p.data, gs), batch).ber)
        if b == per_epoch - 1:
            row = EpochLog(epoch + 1, float(np.mean(losses)), float(np.mean(bers)))
            logs.append(row)
            log.info("epoch %d loss %.5f batch-ber %.5f", row.epoch, row.mean_loss, row.mean_batch_ber)
            if on_epoch is not None:
                on_epoch(row)
            losses, bers = [], []

    params = {k: v.copy() for k, v in model.state_dict().items()}
    moments = {k: (m.copy(), v.copy()) for k, (m, v) in opt.moments.items()}
    return Checkpoint(cfg, gs, params, moments, step=max(end, start.step)), logs
