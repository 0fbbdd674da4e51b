"""
Gradient-check suite: every differentiable op and every composed loss, checked
against central differences on seeded random points in 64-bit.

Run with:
    python3 -m src.pipeline.cli gradcheck
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.align.features import FeatureKind, FeatureMap, LossWeights
from src.align.losses import gram_offdiag, normalize, pointwise_loss, relational_softmax, struc_kl_loss, struc_mse_loss
from src.align.total import total_alignment_loss
from src.autodiff import functions as F
from src.autodiff.gradcheck import GradCheckReport, grad_check
from src.autodiff.tensor import Tensor, precision
from src.flow.objective import fm_loss
from src.pipeline.errors import ConfigError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Sequence[Tensor]], Tensor]
Builder = Callable[[np.random.Generator, int, int], Tuple[ScalarFn, List[np.ndarray]]]

# Primitive ops run at one width; composed losses follow SuiteSettings.feature_widths.
OP_WIDTH = 3


@dataclass(frozen=True)
class SuiteSettings:
    """The ``gradcheck`` section of the lab settings."""

    instances: int = 10
    step: float = 1e-3
    tol: float = 1e-3
    token_counts: Tuple[int, ...] = (2, 3, 4, 5)
    feature_widths: Tuple[int, ...] = (2, 3, 4)

    @classmethod
    def from_settings(cls, section) -> "SuiteSettings":
        section = dict(section or {})
        unknown = sorted(set(section) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"Unknown gradcheck settings: {unknown}")
        for key in ("token_counts", "feature_widths"):
            if key in section:
                section[key] = tuple(int(n) for n in section[key])
        settings = cls(**section)
        if (settings.instances < 1 or not settings.token_counts or min(settings.token_counts) < 2
                or not settings.feature_widths or min(settings.feature_widths) < 2):
            raise ConfigError(f"Invalid gradcheck settings: {settings}")
        return settings


def _uniform(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=shape)


def _contract(rng: np.random.Generator, shape: Tuple[int, ...]) -> Callable[[Tensor], Tensor]:
    """Fixed random linear functional, turning a tensor output into a scalar."""
    weights = _uniform(rng, *shape)
    return lambda y: F.sum(F.mul(y, Tensor(weights)))


# ============================================================
# Primitive ops
# ============================================================

def _binary(kind: str) -> Builder:
    def build(rng, n, _d):
        a, b = _uniform(rng, n, OP_WIDTH), _uniform(rng, n, OP_WIDTH)
        out = _contract(rng, a.shape)
        return (lambda xs: out(F.elementwise(xs[0], xs[1], kind))), [a, b]
    return build


def _scale(rng, n, _d):
    a = _uniform(rng, n, OP_WIDTH)
    c = float(rng.uniform(-2.0, 2.0))
    out = _contract(rng, a.shape)
    return (lambda xs: out(F.scale(xs[0], c))), [a]


def _square(rng, n, _d):
    a = _uniform(rng, n, OP_WIDTH)
    out = _contract(rng, a.shape)
    return (lambda xs: out(F.square(xs[0]))), [a]


def _matmul(rng, n, _d):
    a, b = _uniform(rng, n, OP_WIDTH), _uniform(rng, OP_WIDTH, n)
    out = _contract(rng, (n, n))
    return (lambda xs: out(F.matmul(xs[0], xs[1]))), [a, b]


def _linear(rng, n, _d):
    x, w, b = _uniform(rng, n, OP_WIDTH), _uniform(rng, OP_WIDTH, 2), _uniform(rng, 2)
    out = _contract(rng, (n, 2))
    return (lambda xs: out(F.linear(xs[0], xs[1], xs[2]))), [x, w, b]


def _transpose(rng, n, _d):
    a = _uniform(rng, n, OP_WIDTH)
    out = _contract(rng, (OP_WIDTH, n))
    return (lambda xs: out(F.transpose(xs[0], (1, 0)))), [a]


def _reshape(rng, n, _d):
    a = _uniform(rng, n, OP_WIDTH)
    out = _contract(rng, (n * OP_WIDTH,))
    return (lambda xs: out(F.reshape(xs[0], (n * OP_WIDTH,)))), [a]


def _broadcast(rng, n, _d):
    a = _uniform(rng, 1, OP_WIDTH)
    out = _contract(rng, (n, OP_WIDTH))
    return (lambda xs: out(F.broadcast_to(xs[0], (n, OP_WIDTH)))), [a]


def _embedding(rng, n, _d):
    table = _uniform(rng, n, OP_WIDTH)
    ids = rng.integers(0, n, size=n + 1)
    out = _contract(rng, (n + 1, OP_WIDTH))
    return (lambda xs: out(F.embedding(xs[0], ids))), [table]


def _normalize(rng, n, _d):
    z = _uniform(rng, n, OP_WIDTH)
    out = _contract(rng, z.shape)
    return (lambda xs: out(F.row_l2_normalize(xs[0]))), [z]


def _softmax(rng, n, _d):
    logits = _uniform(rng, n, n)
    tau = float(rng.uniform(0.5, 2.0))
    out = _contract(rng, logits.shape)
    return (lambda xs: out(F.row_softmax(xs[0], tau))), [logits]


def _activation(kind: str) -> Builder:
    def build(rng, n, _d):
        x = _uniform(rng, n, OP_WIDTH)
        out = _contract(rng, x.shape)
        return (lambda xs: out(F.activation(xs[0], kind))), [x]
    return build


def _layer_norm(rng, n, _d):
    x, g, b = _uniform(rng, n, OP_WIDTH), _uniform(rng, OP_WIDTH), _uniform(rng, OP_WIDTH)
    out = _contract(rng, x.shape)
    return (lambda xs: out(F.layer_norm(xs[0], xs[1], xs[2]))), [x, g, b]


def _log(rng, n, _d):
    # log is checked on (0.5, 1.5]: the floored branch has no derivative
    x = 0.5 + np.abs(_uniform(rng, n, OP_WIDTH))
    out = _contract(rng, x.shape)
    return (lambda xs: out(F.log(xs[0]))), [x]


def _reduce(kind: str) -> Builder:
    def build(rng, n, _d):
        x = _uniform(rng, n, OP_WIDTH)
        out = _contract(rng, (n,))
        return (lambda xs: out(F.reduce(xs[0], kind, axes=-1))), [x]
    return build


def _offdiag(rng, n, _d):
    s = _uniform(rng, n, n)
    out = _contract(rng, (n, n - 1))
    return (lambda xs: out(F.extract_offdiagonal(xs[0]))), [s]


# ============================================================
# Composed losses (gradients w.r.t. the student side only)
# ============================================================

def _teacher(rng, n, d) -> FeatureMap:
    return FeatureMap(Tensor(_uniform(rng, n, d)), FeatureKind.TEACHER_RAW)


def _student(x: Tensor) -> FeatureMap:
    return FeatureMap(x, FeatureKind.STUDENT_RAW)


def _fm(rng, n, d):
    x0, x1 = _uniform(rng, n, d), _uniform(rng, n, d)
    return (lambda xs: fm_loss(xs[0], x0, x1)), [_uniform(rng, n, d)]


def _pointwise(rng, n, d):
    h_t = _teacher(rng, n, d)
    return (lambda xs: pointwise_loss(normalize(h_t), normalize(_student(xs[0])))), [_uniform(rng, n, d)]


def _struc_mse(rng, n, d):
    h_t = _teacher(rng, n, d)

    def fn(xs):
        return struc_mse_loss(gram_offdiag(normalize(h_t)), gram_offdiag(normalize(_student(xs[0]))))
    return fn, [_uniform(rng, n, d)]


def _struc_kl(rng, n, d):
    h_t = _teacher(rng, n, d)
    weights = LossWeights(variant="kl")

    def fn(xs):
        p_t = relational_softmax(gram_offdiag(normalize(h_t)), weights.tau_t)
        p_s = relational_softmax(gram_offdiag(normalize(_student(xs[0]))), weights.tau_s)
        return struc_kl_loss(p_t, p_s)
    return fn, [_uniform(rng, n, d)]


def _total(variant: str) -> Builder:
    def build(rng, n, d):
        h_t = _teacher(rng, n, d)
        x0, x1 = _uniform(rng, n, d), _uniform(rng, n, d)
        weights = LossWeights(variant=variant)

        def fn(xs):
            align = total_alignment_loss(h_t, _student(xs[1]), weights)
            return F.add(fm_loss(xs[0], x0, x1), align.combined)
        return fn, [_uniform(rng, n, d), _uniform(rng, n, d)]
    return build


CASES: Tuple[Tuple[str, Builder], ...] = (
    ("add", _binary("add")),
    ("sub", _binary("sub")),
    ("mul", _binary("mul")),
    ("scale", _scale),
    ("square", _square),
    ("matmul", _matmul),
    ("linear", _linear),
    ("transpose", _transpose),
    ("reshape", _reshape),
    ("broadcast_to", _broadcast),
    ("embedding", _embedding),
    ("row_l2_normalize", _normalize),
    ("row_softmax", _softmax),
    ("silu", _activation("silu")),
    ("gelu", _activation("gelu")),
    ("tanh", _activation("tanh")),
    ("layer_norm", _layer_norm),
    ("log", _log),
    ("reduce_sum", _reduce("sum")),
    ("reduce_mean", _reduce("mean")),
    ("extract_offdiagonal", _offdiag),
    ("fm_loss", _fm),
    ("pointwise_loss", _pointwise),
    ("struc_mse_loss", _struc_mse),
    ("struc_kl_loss", _struc_kl),
    ("total_loss_mse", _total("mse")),
    ("total_loss_kl", _total("kl")),
)


def run_case(name: str, build: Builder, seed: int, settings: SuiteSettings) -> List[GradCheckReport]:
    case_index = [case for case, _ in CASES].index(name)
    reports = []
    for instance in range(settings.instances):
        n = settings.token_counts[instance % len(settings.token_counts)]
        d = settings.feature_widths[instance % len(settings.feature_widths)]
        rng = np.random.default_rng([seed, case_index, instance])
        with precision(np.float64):
            fn, point = build(rng, n, d)
        reports.append(
            grad_check(fn, point, step=settings.step, tol=settings.tol, op_name=f"{name}[N={n},D={d}]")
        )
    return reports


def run_suite(seed: int = 0, settings: SuiteSettings = SuiteSettings()) -> pd.DataFrame:
    """
    Check every case and summarize the worst instance per op.

    Returns:
        DataFrame with columns op, max_rel_error, passed, instances, diagnostic
    """
    rows = []
    for name, build in CASES:
        reports = run_case(name, build, seed, settings)
        worst = max(reports, key=lambda r: r.max_rel_error)
        rows.append({
            "op": name,
            "max_rel_error": worst.max_rel_error,
            "passed": all(r.passed for r in reports),
            "instances": len(reports),
            "diagnostic": worst.diagnostic,
        })
        logger.debug("gradcheck %s: worst %s at %.3e", name, worst.op_name, worst.max_rel_error)
    return pd.DataFrame(rows, columns=["op", "max_rel_error", "passed", "instances", "diagnostic"])
