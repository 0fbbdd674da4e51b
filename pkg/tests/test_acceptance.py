"""
Acceptance checks at desk scale.

The oracle and similarity-map checks run with the default suite. The training
runs take minutes and are marked ``slow``:

    pytest -m slow tests/test_acceptance.py
"""

import json
import math
import shutil

import numpy as np
import pytest

from src.align.features import LossWeights
from src.align.losses import student_features, teacher_features
from src.align.total import total_alignment_loss
from src.autodiff.tensor import Tensor, precision
from src.evaluation.gram_discrepancy import gram_discrepancy
from src.evaluation.pgm import read_pgm
from src.evaluation.report import EvalSettings
from src.evaluation.simmap import simmap_export
from src.pipeline.cli import main
from src.pipeline.sweep import SweepGrid, SweepRunner, SweepSettings, holdout_config
from src.pipeline.utils import project_root
from src.synth.patchify import unpatchify
from src.synth.render import ImageSet, render_dataset
from src.training.checkpoint import load_checkpoint
from src.training.config import TrainConfig
from src.training.metrics import read_metrics
from src.training.trainer import TrainState, train_loop

CONFIG_DIR = project_root() / "src" / "config"


def _experiment(name, **train_overrides):
    raw = json.loads((CONFIG_DIR / "experiments" / f"{name}.json").read_text(encoding="utf-8"))
    raw["train"].update(train_overrides)
    return raw


# =============================================================================
# Scalar oracle (shares no code with the package)
# =============================================================================

def _oracle_total(h_t, h_s, lambda_proj, lambda_struc, variant, tau_t=0.2, tau_s=0.2):
    n, d = len(h_t), len(h_t[0])

    def unit(row):
        norm = math.sqrt(sum(v * v for v in row))
        return [v / norm for v in row]

    zt = [unit(r) for r in h_t]
    zs = [unit(r) for r in h_s]

    def dot(a, b):
        return sum(a[k] * b[k] for k in range(d))

    proj = sum(1.0 - dot(zt[i], zs[i]) for i in range(n)) / n

    if variant == "mse":
        sq = sum((dot(zt[i], zt[j]) - dot(zs[i], zs[j])) ** 2 for i in range(n) for j in range(n) if i != j)
        struc = sq / (n * (n - 1))
    else:
        struc = 0.0
        for i in range(n):
            others = [j for j in range(n) if j != i]
            lt = [dot(zt[i], zt[j]) / tau_t for j in others]
            ls = [dot(zs[i], zs[j]) / tau_s for j in others]
            zt_sum = sum(math.exp(v - max(lt)) for v in lt)
            zs_sum = sum(math.exp(v - max(ls)) for v in ls)
            for a, b in zip(lt, ls):
                p = math.exp(a - max(lt)) / zt_sum
                q = math.exp(b - max(ls)) / zs_sum
                struc += p * math.log(p / q)
        struc /= n
    return lambda_proj * proj + lambda_struc * struc


class TestOracleEquivalence:
    @pytest.mark.parametrize("variant,lambda_struc", [("mse", 2.0), ("kl", 0.5)])
    def test_hundred_seeded_cases(self, variant, lambda_struc):
        weights = LossWeights(lambda_proj=1.0, lambda_struc=lambda_struc, variant=variant)
        for case in range(100):
            rng = np.random.default_rng([17, case])
            n, d = int(rng.integers(2, 5)), int(rng.integers(2, 4))
            h_t, h_s = rng.standard_normal((n, d)), rng.standard_normal((n, d))
            with precision(np.float64):
                got = total_alignment_loss(
                    teacher_features(Tensor(h_t)), student_features(Tensor(h_s)), weights
                ).combined.item()
            expected = _oracle_total(h_t.tolist(), h_s.tolist(), 1.0, lambda_struc, variant)
            assert got == pytest.approx(expected, abs=1e-6), (variant, case, n, d)

    @pytest.mark.parametrize("variant", ["mse", "kl", "none"])
    def test_positive_token_rescaling_invariance(self, rng, variant):
        h_t, h_s = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
        scales = rng.uniform(0.1, 10.0, size=(4, 1))
        weights = LossWeights(variant=variant, lambda_struc=0.5 if variant == "kl" else 2.0)
        with precision(np.float64):
            base = total_alignment_loss(teacher_features(Tensor(h_t)), student_features(Tensor(h_s)), weights)
            scaled = total_alignment_loss(
                teacher_features(Tensor(h_t * scales)), student_features(Tensor(h_s * scales[::-1])), weights
            )
        assert scaled.combined.item() == pytest.approx(base.combined.item(), abs=1e-5)


# =============================================================================
# Similarity maps on a constructed image
# =============================================================================

class TestTwoBlobSimilarityMap:
    BLOB_TOKENS = [0, 1, 4, 5, 10, 11, 14, 15]

    def test_teacher_map_concentrates_on_blobs(self, tmp_path):
        config = TrainConfig.from_dict(_experiment("smoke"))
        ckpt = TrainState.fresh(config).to_checkpoint()

        tokens = np.full((16, 16), -1.0, dtype=np.float32)
        tokens[self.BLOB_TOKENS] = 1.0
        image = ImageSet(4, 4, 4, unpatchify(tokens, 4, 4)[None].astype(np.float32), np.array([0]))

        teacher_path, student_path = simmap_export(ckpt, image, image_index=0, anchor_token=0, out_dir=tmp_path)
        for path in (teacher_path, student_path):
            assert path.read_bytes()[:2] == b"P5"
        gray = read_pgm(teacher_path).reshape(-1).astype(float)
        inside = np.isin(np.arange(16), self.BLOB_TOKENS)
        assert gray[inside].mean() - gray[~inside].mean() >= 20


# =============================================================================
# Gradient checks
# =============================================================================

@pytest.mark.slow
def test_full_gradcheck_suite_passes():
    assert main(["--quiet", "gradcheck"]) == 0


# =============================================================================
# Determinism and resume
# =============================================================================

@pytest.mark.slow
def test_two_hundred_step_determinism_and_resume(tmp_path):
    config = TrainConfig.from_dict(_experiment("smoke", total_steps=200, checkpoint_every=100))
    first = train_loop(config, out_dir=tmp_path / "a")
    second = train_loop(config, out_dir=tmp_path / "b")
    assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()

    resumed = tmp_path / "c"
    resumed.mkdir()
    shutil.copy(first / "metrics.csv", resumed / "metrics.csv")
    train_loop(config, out_dir=resumed, resume=first / "ckpt_000100.srpc")
    assert (resumed / "metrics.csv").read_bytes() == (first / "metrics.csv").read_bytes()


# =============================================================================
# Directional experiment
# =============================================================================

@pytest.mark.slow
def test_structural_supervision_is_effective(tmp_path):
    results = {}
    for name in ("fm_only", "pointwise", "structural_mse"):
        config = TrainConfig.from_dict(_experiment(name))
        run_dir = train_loop(config, out_dir=tmp_path / name)
        metrics = read_metrics(run_dir / "metrics.csv")
        first, last = metrics["loss_total"].iloc[:100].mean(), metrics["loss_total"].iloc[-100:].mean()
        assert last <= 0.7 * first, (name, first, last)

        holdout = render_dataset(holdout_config(config.data, SweepSettings()))
        results[name] = gram_discrepancy(load_checkpoint(run_dir / "final.srpc"), holdout)

    assert results["structural_mse"] <= 0.8 * results["pointwise"], results


# =============================================================================
# Ablation harness
# =============================================================================

@pytest.mark.slow
@pytest.mark.parametrize("base,grid,cells", [
    ("structural_kl", "temperature", 7),
    ("structural_mse", "loss_weights_subset", 4),
])
def test_sweep_rows_complete(tmp_path, base, grid, cells):
    base_path = tmp_path / f"{base}.json"
    base_path.write_text(json.dumps(_experiment(base, total_steps=500)), encoding="utf-8")
    sweep = SweepGrid.load(CONFIG_DIR / "grids" / f"{grid}.yaml", base_path, tmp_path / f"{grid}.csv")

    table = SweepRunner(sweep, SweepSettings(), EvalSettings()).run()
    assert len(table) == cells
    assert (table["error"] == "").all()
    assert np.isfinite(table[["gram_discrepancy", "frechet", "loss_total"]].to_numpy(dtype=float)).all()
