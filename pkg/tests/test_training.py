"""
Tests for the training harness: config parsing, AdamW, EMA, random streams,
checkpoint files, metrics and the training loop itself.
"""

import json
import shutil

import numpy as np
import pytest

from src.align.total import total_alignment_loss
from src.autodiff.tensor import Tape
from src.flow.interpolant import make_flow_batch
from src.flow.objective import fm_loss, total_training_loss
from src.nets.layers import bind
from src.nets.projector import projector_forward
from src.nets.student import student_forward
from src.nets.teacher import teacher_encode
from src.pipeline.errors import CheckpointFormatError, ConfigError, NumericalError, ShapeError
from src.training.checkpoint import checkpoint_bytes, load_checkpoint, models_from_checkpoint, save_checkpoint
from src.training.config import OptimConfig, TrainConfig
from src.training.metrics import METRICS_COLUMNS, MetricsRow, MetricsWriter, read_metrics
from src.training.optim import AdamW, EmaState, adamw_step, ema_update
from src.training.rng import RandomStreams
from src.training.trainer import HEAD_PREFIX, TrainState, sample_batch, train_loop, train_step


# =============================================================================
# Config
# =============================================================================

class TestTrainConfig:
    def test_dict_roundtrip(self, tiny_config):
        assert TrainConfig.from_dict(tiny_config.to_dict()) == tiny_config

    def test_derived_model_keys(self, tiny_config):
        assert tiny_config.model.n_tokens == 4
        assert tiny_config.model.d_latent == 4
        assert tiny_config.model.n_classes == 2

    def test_missing_sections_use_defaults(self):
        cfg = TrainConfig.from_dict({})
        assert cfg.optim.learning_rate == 1e-4
        assert cfg.loss.variant == "mse"

    def test_unknown_keys_rejected(self, tiny_raw):
        tiny_raw["loss"]["lambda_extra"] = 1.0
        with pytest.raises(ConfigError, match="lambda_extra"):
            TrainConfig.from_dict(tiny_raw)
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"schedule": {}})

    def test_derived_keys_cannot_be_set(self, tiny_raw):
        tiny_raw["model"]["n_tokens"] = 9
        with pytest.raises(ConfigError):
            TrainConfig.from_dict(tiny_raw)

    def test_type_checked(self, tiny_raw):
        tiny_raw["train"]["total_steps"] = "ten"
        with pytest.raises(ConfigError, match="train.total_steps"):
            TrainConfig.from_dict(tiny_raw)

    def test_int_accepted_for_float(self, tiny_raw):
        tiny_raw["loss"]["lambda_struc"] = 2
        assert TrainConfig.from_dict(tiny_raw).loss.lambda_struc == 2.0

    def test_pointwise_config_without_struc_weight(self, tiny_raw):
        tiny_raw["loss"] = {"lambda_proj": 1.0, "variant": "none"}
        loss = TrainConfig.from_dict(tiny_raw).loss
        assert (loss.variant, loss.lambda_struc) == ("none", 0.0)

    def test_kl_config_without_struc_weight(self, tiny_raw):
        tiny_raw["loss"] = {"variant": "kl"}
        cfg = TrainConfig.from_dict(tiny_raw)
        assert cfg.loss.lambda_struc == 0.5
        assert cfg.to_dict()["loss"]["lambda_struc"] == 0.5
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            TrainConfig.load(tmp_path / "absent.json")

    def test_load_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            TrainConfig.load(path)

    def test_save_then_load(self, tmp_path, tiny_config):
        path = tiny_config.save(tmp_path / "cfg" / "config.json")
        assert TrainConfig.load(path) == tiny_config
        assert json.loads(path.read_text())["data"]["grid"] == 2

    @pytest.mark.parametrize(
        "name", ["structural_mse", "structural_kl", "pointwise", "fm_only", "structure_only", "smoke"]
    )
    def test_shipped_experiments_parse(self, name):
        from src.pipeline.utils import project_root

        cfg = TrainConfig.load(project_root() / "src" / "config" / "experiments" / f"{name}.json")
        assert cfg.model.align_depth <= cfg.model.depth

    @pytest.mark.parametrize("name", ["structural_mse", "structural_kl", "pointwise", "fm_only", "structure_only"])
    def test_full_length_experiments_use_default_optimizer(self, name):
        from src.pipeline.utils import project_root

        cfg = TrainConfig.load(project_root() / "src" / "config" / "experiments" / f"{name}.json")
        assert cfg.train.total_steps == 2000
        assert cfg.optim == OptimConfig()
        assert (cfg.optim.learning_rate, cfg.optim.ema_decay) == (1e-4, 0.9999)


# =============================================================================
# Optimizer and EMA
# =============================================================================

class TestAdamW:
    def test_zero_gradient_leaves_params(self):
        params = {"w": np.array([1.0, -2.0], dtype=np.float32)}
        optim = AdamW(OptimConfig(learning_rate=0.1), params)
        out = adamw_step(optim, params, {"w": np.zeros(2, dtype=np.float32)})
        np.testing.assert_array_equal(out["w"], params["w"])
        assert optim.step == 1

    def test_first_step_magnitude_is_learning_rate(self):
        params = {"w": np.array([0.0])}
        optim = AdamW(OptimConfig(learning_rate=0.01), params)
        out = adamw_step(optim, params, {"w": np.array([1.0])})
        assert out["w"][0] == pytest.approx(-0.01, rel=1e-6)

    def test_decoupled_weight_decay(self):
        params = {"w": np.array([2.0])}
        optim = AdamW(OptimConfig(learning_rate=0.1, weight_decay=0.5), params)
        out = adamw_step(optim, params, {"w": np.array([0.0])})
        assert out["w"][0] == pytest.approx(2.0 * (1 - 0.1 * 0.5))

    def test_deterministic_trajectory(self, rng):
        grads = [{"w": rng.standard_normal(3)} for _ in range(5)]

        def run():
            params = {"w": np.ones(3)}
            optim = AdamW(OptimConfig(learning_rate=0.05), params)
            for g in grads:
                params = adamw_step(optim, params, g)
            return params["w"]

        np.testing.assert_array_equal(run(), run())

    def test_non_finite_gradient_aborts(self):
        params = {"w": np.zeros(2)}
        optim = AdamW(OptimConfig(), params)
        with pytest.raises(NumericalError, match="'w'"):
            adamw_step(optim, params, {"w": np.array([np.inf, 0.0])})
        assert optim.step == 0

    def test_shape_mismatch(self):
        params = {"w": np.zeros(2)}
        with pytest.raises(ShapeError):
            adamw_step(AdamW(OptimConfig(), params), params, {"w": np.zeros(3)})


class TestEma:
    def test_zero_decay_copies_params(self):
        ema = EmaState.track({"w": np.zeros(2)}, decay=0.0)
        np.testing.assert_array_equal(ema_update(ema, {"w": np.array([3.0, 4.0])})["w"], [3.0, 4.0])

    def test_unit_decay_keeps_shadow(self):
        ema = EmaState.track({"w": np.zeros(2)}, decay=1.0)
        np.testing.assert_array_equal(ema_update(ema, {"w": np.array([3.0, 4.0])})["w"], [0.0, 0.0])

    def test_monotone_convergence(self):
        ema = EmaState.track({"w": np.zeros(1)}, decay=0.8)
        history = [ema_update(ema, {"w": np.array([1.0])})["w"][0] for _ in range(20)]
        assert all(b > a for a, b in zip(history, history[1:]))
        assert all(v < 1.0 for v in history)


class TestRandomStreams:
    def test_streams_are_independent(self):
        streams = RandomStreams(0)
        assert streams.noise.random() != streams.time.random()

    def test_state_restore(self):
        a = RandomStreams(5)
        a.noise.random(3)
        saved = a.state()
        expected = a.noise.random(4)
        b = RandomStreams(5)
        b.restore(json.loads(json.dumps(saved)))
        np.testing.assert_array_equal(b.noise.random(4), expected)

    def test_restore_missing_stream(self):
        with pytest.raises(CheckpointFormatError):
            RandomStreams(0).restore({"noise": {}})


# =============================================================================
# Metrics
# =============================================================================

class TestMetrics:
    def test_append_and_truncate(self, tmp_path):
        writer = MetricsWriter(tmp_path / "metrics.csv")
        for step in range(1, 5):
            writer.append(MetricsRow(step, 1.0, 0.5, 0.25, 2.0, 0.1, 0))
        writer.truncate_after(2)
        frame = read_metrics(tmp_path / "metrics.csv")
        assert list(frame.columns) == METRICS_COLUMNS
        assert frame["step"].tolist() == [1, 2]


# =============================================================================
# Checkpoints
# =============================================================================

class TestCheckpoint:
    def test_save_load_save_is_byte_identical(self, tmp_path, tiny_config):
        ckpt = TrainState.fresh(tiny_config).to_checkpoint()
        path = save_checkpoint(ckpt, tmp_path / "a.srpc")
        again = load_checkpoint(path)
        assert checkpoint_bytes(again) == path.read_bytes()
        assert again.config == tiny_config

    def test_crc_detects_corruption(self, tmp_path, tiny_config):
        path = save_checkpoint(TrainState.fresh(tiny_config).to_checkpoint(), tmp_path / "a.srpc")
        blob = bytearray(path.read_bytes())
        blob[-10] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointFormatError, match="CRC"):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.srpc"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(CheckpointFormatError, match="magic"):
            load_checkpoint(path)

    def test_models_use_ema_by_default(self, tiny_config):
        state = TrainState.fresh(tiny_config)
        ckpt = state.to_checkpoint()
        ckpt.ema = {k: v + 1.0 for k, v in ckpt.ema.items()}
        ema_student, _, _ = models_from_checkpoint(ckpt)
        raw_student, _, _ = models_from_checkpoint(ckpt, use_ema=False)
        name = "token_embed.w"
        np.testing.assert_array_equal(ema_student.params[name], ckpt.ema[name])
        np.testing.assert_array_equal(raw_student.params[name], ckpt.student[name])


# =============================================================================
# Training step and loop
# =============================================================================

class TestTrainStep:
    def test_zero_weights_give_flow_loss_only(self, tiny_raw):
        tiny_raw["loss"] = {"lambda_proj": 0.0, "lambda_struc": 0.0, "variant": "none"}
        state = TrainState.fresh(TrainConfig.from_dict(tiny_raw))
        tokens = np.random.default_rng(0).uniform(-1, 1, size=(8, 4, 4)).astype(np.float32)
        row = train_step(state, sample_batch(state, tokens, np.zeros(8, dtype=np.int64)))
        assert row.loss_total == pytest.approx(row.loss_fm, rel=1e-6)

    def test_first_step_flow_loss_with_zero_head(self, tiny_config):
        state = TrainState.fresh(tiny_config)
        streams = RandomStreams(tiny_config.train.seed)
        tokens = np.random.default_rng(0).uniform(-1, 1, size=(8, 4, 4)).astype(np.float32)
        labels = np.zeros(8, dtype=np.int64)

        # Replay the same draws to get x0 for the first batch.
        idx = streams.data_order.integers(0, 8, size=tiny_config.train.batch_size)
        x1 = tokens[idx]
        x0 = streams.noise.standard_normal(x1.shape).astype(np.float32)
        expected = float(np.mean((x1 - x0) ** 2))

        row = train_step(state, sample_batch(state, tokens, labels))
        assert row.loss_fm == pytest.approx(expected, rel=1e-5)
        assert row.step == 1

    def test_updates_parameters_and_ema(self, tiny_config):
        state = TrainState.fresh(tiny_config)
        before = {k: v.copy() for k, v in state.student.params.items()}
        tokens = np.random.default_rng(0).uniform(-1, 1, size=(8, 4, 4)).astype(np.float32)
        train_step(state, sample_batch(state, tokens, np.zeros(8, dtype=np.int64)))
        assert any(not np.array_equal(before[k], state.student.params[k]) for k in before)
        assert state.optimizer.step == 1

    @pytest.mark.parametrize("loss, moves", [
        ({"lambda_proj": 0.0, "lambda_struc": 0.0, "variant": "mse"}, False),
        ({"lambda_proj": 1.0, "lambda_struc": 0.0, "variant": "none"}, True),
        ({"lambda_proj": 0.0, "lambda_struc": 0.5, "variant": "kl"}, True),
    ])
    def test_projector_gradient_only_from_alignment(self, tiny_raw, loss, moves):
        tiny_raw["loss"] = loss
        state = TrainState.fresh(TrainConfig.from_dict(tiny_raw))
        before = {k: v.copy() for k, v in state.head.params.items()}
        tokens = np.random.default_rng(0).uniform(-1, 1, size=(8, 4, 4)).astype(np.float32)
        train_step(state, sample_batch(state, tokens, np.array([0, 1] * 4)))

        head_moments = [m for name, m in state.optimizer.m.items() if name.startswith(HEAD_PREFIX)]
        assert head_moments
        if moves:
            assert all(np.abs(m).sum() > 0 for m in head_moments)
            assert any(not np.array_equal(before[k], state.head.params[k]) for k in before)
        else:
            assert all(not m.any() for m in head_moments)
            for name, value in before.items():
                np.testing.assert_array_equal(state.head.params[name], value)

    def test_ema_is_a_pure_observer(self, tiny_raw):
        tokens = np.random.default_rng(0).uniform(-1, 1, size=(8, 4, 4)).astype(np.float32)
        labels = np.array([0, 1] * 4)
        states, rows = [], []
        for decay in (0.0, 0.5, 1.0):
            tiny_raw["optim"]["ema_decay"] = decay
            state = TrainState.fresh(TrainConfig.from_dict(tiny_raw))
            rows.append([train_step(state, sample_batch(state, tokens, labels)) for _ in range(3)])
            states.append(state)

        reference = states[0]
        for state, state_rows in zip(states[1:], rows[1:]):
            assert state_rows == rows[0]
            for name, value in reference.student.params.items():
                np.testing.assert_array_equal(state.student.params[name], value)
            for name, value in reference.optimizer.m.items():
                np.testing.assert_array_equal(state.optimizer.m[name], value)
                np.testing.assert_array_equal(state.optimizer.v[name], reference.optimizer.v[name])
        frozen = states[2].ema.shadow
        assert any(not np.array_equal(frozen[k], reference.ema.shadow[k]) for k in frozen)

    def test_backward_replay_is_bit_identical(self, tiny_config):
        state = TrainState.fresh(tiny_config)
        draws = np.random.default_rng(5)
        x1 = draws.uniform(-1, 1, size=(4, 4, 4)).astype(np.float32)
        flow = make_flow_batch(x1, np.array([0, 1, 2, 1]), draws, draws)

        def record():
            tape = Tape()
            bound = bind(state.student.params, tape)
            bound_head = bind(state.head.params, tape)
            velocity, hidden = student_forward(state.student, flow.xt, flow.t, flow.labels, bound=bound)
            h_t = teacher_encode(state.teacher, flow.x1)
            h_s = projector_forward(state.head, hidden, bound=bound_head, token_grid=h_t.token_grid)
            align = total_alignment_loss(h_t, h_s, tiny_config.loss)
            total = total_training_loss(fm_loss(velocity, flow.x0, flow.x1), align)
            return tape, total, list(bound.values()) + list(bound_head.values())

        tape, total, leaves = record()
        first = tape.backward(total)
        second = tape.backward(total)
        other_tape, other_total, other_leaves = record()
        rebuilt = other_tape.backward(other_total)
        assert other_total.item() == total.item()
        for leaf, other in zip(leaves, other_leaves):
            np.testing.assert_array_equal(first.of(leaf), second.of(leaf))
            np.testing.assert_array_equal(first.of(leaf), rebuilt.of(other))
        assert any(np.abs(first.of(leaf)).sum() > 0 for leaf in leaves)


class TestTrainLoop:
    def test_run_directory_contents(self, trained_run):
        run_dir, ckpt = trained_run
        assert (run_dir / "config.json").exists()
        assert (run_dir / "ckpt_000003.srpc").exists()
        assert (run_dir / "ckpt_000006.srpc").exists()
        assert ckpt.step == 6
        frame = read_metrics(run_dir / "metrics.csv")
        assert frame["step"].tolist() == [1, 2, 3, 4, 5, 6]
        assert (frame["wallclock_ms"] == 0).all()
        assert np.isfinite(frame[["loss_fm", "loss_proj", "loss_struc", "loss_total"]].to_numpy()).all()

    def test_same_seed_same_metrics(self, tmp_path, tiny_config, trained_run):
        run_dir, _ = trained_run
        train_loop(tiny_config, out_dir=tmp_path / "again")
        assert (tmp_path / "again" / "metrics.csv").read_bytes() == (run_dir / "metrics.csv").read_bytes()

    def test_resume_matches_uninterrupted_run(self, tmp_path, tiny_config, trained_run):
        run_dir, _ = trained_run
        resumed = tmp_path / "resumed"
        resumed.mkdir()
        shutil.copy(run_dir / "metrics.csv", resumed / "metrics.csv")
        train_loop(tiny_config, out_dir=resumed, resume=run_dir / "ckpt_000003.srpc")
        assert (resumed / "metrics.csv").read_bytes() == (run_dir / "metrics.csv").read_bytes()
        assert (resumed / "final.srpc").read_bytes() == (run_dir / "final.srpc").read_bytes()

    def test_resume_from_final_does_nothing(self, tmp_path, tiny_config, trained_run):
        run_dir, _ = trained_run
        train_loop(tiny_config, out_dir=tmp_path / "noop", resume=run_dir / "final.srpc")
        assert load_checkpoint(tmp_path / "noop" / "final.srpc").step == 6
