import numpy as np

from src.synth.base_shape import Params, ShapeRenderer


class DiskRenderer(ShapeRenderer):
    name = "disk"

    def sample_params(self, rng: np.random.Generator, side: int) -> Params:
        params = self.sample_center(rng, side)
        params["radius"] = float(rng.uniform(0.2, 0.35) * side)
        return params

    def inside(self, ys: np.ndarray, xs: np.ndarray, params: Params) -> np.ndarray:
        return (ys - params["cy"]) ** 2 + (xs - params["cx"]) ** 2 <= params["radius"] ** 2


class SquareRenderer(ShapeRenderer):
    name = "square"

    def sample_params(self, rng: np.random.Generator, side: int) -> Params:
        params = self.sample_center(rng, side)
        params["half"] = float(rng.uniform(0.2, 0.35) * side)
        return params

    def inside(self, ys: np.ndarray, xs: np.ndarray, params: Params) -> np.ndarray:
        half = params["half"]
        return (np.abs(ys - params["cy"]) <= half) & (np.abs(xs - params["cx"]) <= half)


class CrossRenderer(ShapeRenderer):
    name = "cross"

    def sample_params(self, rng: np.random.Generator, side: int) -> Params:
        params = self.sample_center(rng, side)
        params["arm"] = float(rng.uniform(0.25, 0.4) * side)
        params["width"] = float(rng.uniform(0.07, 0.12) * side)
        return params

    def inside(self, ys: np.ndarray, xs: np.ndarray, params: Params) -> np.ndarray:
        dy = np.abs(ys - params["cy"])
        dx = np.abs(xs - params["cx"])
        arm, width = params["arm"], params["width"]
        return ((dy <= width) & (dx <= arm)) | ((dx <= width) & (dy <= arm))


class HorizontalStripesRenderer(ShapeRenderer):
    """Full-image horizontal bands with 50% duty cycle."""

    name = "hstripes"

    def sample_params(self, rng: np.random.Generator, side: int) -> Params:
        period = float(rng.uniform(3.0, 6.0))
        return {"period": period, "phase": float(rng.uniform(0.0, period))}

    def inside(self, ys: np.ndarray, xs: np.ndarray, params: Params) -> np.ndarray:
        period = params["period"]
        return np.mod(ys + params["phase"], period) < 0.5 * period
