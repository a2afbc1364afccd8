import math

import numpy as np
import pytest

from communet.channel import uncoded_bpsk_ber
from communet.coding import CodeSpec
from communet.nn import UNetConfig, build_unet, count_params, layer_shapes
from communet.pipeline.checkpoint import (
    BadMagicError,
    CheckpointError,
    TruncatedCheckpointError,
    VersionMismatchError,
    from_bytes,
    load_checkpoint,
    save_checkpoint,
    to_bytes,
)
from communet.pipeline.config import (
    ConfigError,
    ExperimentConfig,
    TrainConfig,
    format_experiment_config,
    format_train_config,
    parse_experiment_config,
    parse_train_config,
)
from communet.pipeline.data import gen_dataset, transmit
from communet.pipeline.optim import Adam, adam_step
from communet.pipeline.profiling import layer_table, measure_latency
from communet.pipeline.sweep import (
    CSV_HEADER,
    UNetDecoder,
    ber_sweep,
    format_sweep_csv,
    make_decoder,
    parse_sweep_csv,
)
from communet.pipeline.train import batches_per_epoch, initial_checkpoint, train

CODE = CodeSpec.from_octal(["7", "5"], 2)


def tiny(**kw) -> TrainConfig:
    base = dict(block_length=5, net=UNetConfig(depth=1, base_channels=4), num_samples=40,
                batch_size=10, epochs=2, seed=7)
    base.update(kw)
    return TrainConfig(**base)


def same_params(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


# ---- data -------------------------------------------------------------------

def test_dataset_is_deterministic_and_balanced():
    a = gen_dataset(CODE, 49, 2000, seed=3)
    assert a.shape == (2000, 49) and a.dtype == np.uint8
    assert np.array_equal(a, gen_dataset(CODE, 49, 2000, seed=3))
    assert not np.array_equal(a, gen_dataset(CODE, 49, 2000, seed=4))
    assert abs(a.mean() - 0.5) < 0.01


def test_transmit_noiseless_is_bpsk_codeword():
    msgs = np.array([[1, 0, 1, 1]], np.uint8)
    rx = transmit(CODE, msgs, 300.0, np.random.default_rng(0))
    bits = [1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 1, 1]
    assert np.allclose(rx[0], [1.0 - 2 * b for b in bits], atol=1e-12)


# ---- optimiser --------------------------------------------------------------

def test_first_adam_step_closed_form():
    theta = {"w": np.array([0.5, -2.0, 3.0])}
    moments = {"w": (np.zeros(3), np.zeros(3))}
    adam_step(theta, {"w": np.ones(3)}, moments, step=1, lr=0.001)
    assert np.all(np.abs(theta["w"] - np.array([0.5, -2.0, 3.0]) + 0.001) < 1e-9)


def test_adam_second_step_matches_reference():
    theta, g1, g2 = 1.0, 0.3, -0.7
    m = v = 0.0
    for t, g in ((1, g1), (2, g2)):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta -= 0.01 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
    p = {"w": np.array([1.0])}
    mom = {"w": (np.zeros(1), np.zeros(1))}
    adam_step(p, {"w": np.array([g1])}, mom, 1, 0.01)
    adam_step(p, {"w": np.array([g2])}, mom, 2, 0.01)
    assert p["w"][0] == pytest.approx(theta, rel=1e-12)


def test_zero_gradient_leaves_parameters():
    model = build_unet(UNetConfig(depth=1, base_channels=4), 0)
    before = {k: v.copy() for k, v in model.state_dict().items()}
    opt = Adam(model.params)
    for p in opt.params.values():
        p.grad = np.zeros_like(p.data)
    opt.step()
    assert same_params(before, model.state_dict())


# ---- training ---------------------------------------------------------------

def test_training_is_deterministic():
    cfg = tiny()
    a, logs_a = train(cfg)
    b, logs_b = train(cfg)
    assert to_bytes(a) == to_bytes(b)
    assert logs_a == logs_b
    assert [r.epoch for r in logs_a] == [1, 2]
    assert a.step == 2 * batches_per_epoch(cfg)


def test_zero_epochs_is_initialisation():
    cfg = tiny(epochs=0)
    ckpt, logs = train(cfg)
    assert logs == []
    assert same_params(ckpt.params, build_unet(cfg.net, cfg.seed).state_dict())


def test_training_reduces_loss():
    _, logs = train(tiny(epochs=6, num_samples=200, batch_size=20, lr=3e-3))
    assert logs[-1].mean_loss < logs[0].mean_loss


def test_resume_equals_uninterrupted():
    cfg = tiny(epochs=3)
    full, _ = train(cfg)
    half, _ = train(cfg, stop_after=5)
    assert half.step == 5
    restored = from_bytes(to_bytes(half))
    resumed, _ = train(cfg, resume=restored)
    assert same_params(full.params, resumed.params)
    assert to_bytes(full) == to_bytes(resumed)


def test_resume_rejects_other_config():
    ckpt, _ = train(tiny(epochs=0))
    with pytest.raises(ValueError, match="different config"):
        train(tiny(epochs=0, lr=0.5), resume=ckpt)


# ---- checkpoints ------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    ckpt, _ = train(tiny(epochs=1))
    path = tmp_path / "m.cmu"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.config == ckpt.config and back.grid == ckpt.grid and back.step == ckpt.step
    assert same_params(back.params, ckpt.params)
    assert to_bytes(back) == path.read_bytes()
    assert back.param_count == count_params(ckpt.model())


def test_checkpoint_errors():
    raw = to_bytes(initial_checkpoint(tiny()))
    with pytest.raises(BadMagicError, match="bad magic"):
        from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(VersionMismatchError):
        from_bytes(raw[:4] + (99).to_bytes(4, "little") + raw[8:])
    for cut in (6, 20, len(raw) - 3):
        with pytest.raises(TruncatedCheckpointError):
            from_bytes(raw[:cut])
    assert issubclass(BadMagicError, CheckpointError)


# ---- configs ----------------------------------------------------------------

def test_config_round_trip():
    cfg = ExperimentConfig(train=tiny(loss="ssim", snr_min_db=-1.5))
    assert parse_experiment_config(format_experiment_config(cfg)) == cfg
    assert parse_train_config(format_train_config(cfg.train)) == cfg.train


def test_config_errors_name_the_key():
    text = "code.generators = 7,5\ncode.memory = 2\nblock_length = 49\n"
    with pytest.raises(ConfigError, match="loss"):
        parse_train_config(text)
    with pytest.raises(ConfigError, match="use mse"):
        parse_train_config(text + "loss = psnr\n")
    with pytest.raises(ConfigError) as info:
        parse_train_config(text + "loss = bce\nbogus = 1\n")
    assert info.value.line == 5
    with pytest.raises(ConfigError, match="duplicate"):
        parse_train_config(text + "loss = bce\nloss = mse\n")


# ---- sweeps -----------------------------------------------------------------

def test_viterbi_sweep_high_snr_is_error_free():
    (pt,) = ber_sweep("viterbi", CODE, 49, [12.0], min_bits=10**4, seed=1)
    assert pt.report.bit_errors == 0 and pt.report.bits_counted >= 10**4


def test_uncoded_sweep_matches_theory():
    (pt,) = ber_sweep("uncoded", CODE, 100, [0.0], min_bits=2 * 10**5, min_errors=1, seed=2)
    assert abs(pt.ber / uncoded_bpsk_ber(0.0) - 1) < 0.03
    assert pt.code == "none"


def test_sweep_is_monotone_and_seeded():
    pts = ber_sweep("viterbi", CODE, 49, [0.0, 2.0, 4.0], min_bits=2 * 10**4, seed=5)
    bers = [p.ber for p in pts]
    assert bers[0] > bers[1] > bers[2]
    again = ber_sweep("viterbi", CODE, 49, [0.0, 2.0, 4.0], min_bits=2 * 10**4, seed=5)
    assert format_sweep_csv(pts) == format_sweep_csv(again)


def test_sweep_stopping_rule():
    (pt,) = ber_sweep("viterbi", CODE, 50, [0.0], min_bits=10**4, min_errors=10**9, max_bits=3 * 10**4)
    assert 3 * 10**4 <= pt.report.bits_counted < 3 * 10**4 + 1000 * 50
    with pytest.raises(ValueError):
        ber_sweep("viterbi", CODE, 49, [0.0], min_bits=100)


def test_sweep_csv_round_trip():
    pts = ber_sweep("viterbi", CODE, 49, [0.0, 1.0], min_bits=10**4, seed=0)
    text = format_sweep_csv(pts)
    assert text.splitlines()[0] == ",".join(CSV_HEADER) == "decoder,code,snr_db,bits,bit_errors,ber"
    back = parse_sweep_csv(text)
    assert [(p.snr_db, p.report) for p in back] == [(p.snr_db, p.report) for p in pts]
    with pytest.raises(ValueError, match="header"):
        parse_sweep_csv("a,b\n")


def test_unet_sweep_runs_and_workers_agree():
    cfg = tiny()
    model = build_unet(cfg.net, 0)
    dec = make_decoder("unet", CODE, model, cfg.block_length)
    assert isinstance(dec, UNetDecoder)
    one = ber_sweep(dec, CODE, cfg.block_length, [0.0, 4.0], min_bits=10**4, seed=3)
    two = ber_sweep(dec, CODE, cfg.block_length, [0.0, 4.0], min_bits=10**4, seed=3, workers=2)
    assert format_sweep_csv(one) == format_sweep_csv(two)


# ---- profiling --------------------------------------------------------------

def test_layer_table_sums_to_param_count():
    model = build_unet(UNetConfig(depth=2, base_channels=8), 0)
    table = layer_table(model)
    assert [n for n, _, _ in table] == [n for n, _ in layer_shapes(model.cfg)]
    assert sum(s for _, _, s in table) == count_params(model)


def test_latency_is_positive():
    dec = make_decoder("viterbi", CODE)
    lat = measure_latency(dec, np.ones(2 * 51), n_blocks=10, repeats=3)
    assert lat["median_single_s"] > 0 and lat["batched_per_block_s"] > 0
    assert "numpy" in lat["environment"]


def test_full_scale_preset():
    cfg = TrainConfig.full_scale(seed=4)
    assert (cfg.batch_size, cfg.num_samples, cfg.epochs, cfg.seed) == (500, 150_000, 500, 4)
