"""
One global seed split into independent substreams.

Keeping data order, noise, time and label dropout on separate generators means
changing loss weights never changes which batches, noise or times are drawn.
"""

from __future__ import annotations

import copy
from typing import Any, Dict

import numpy as np

from src.pipeline.errors import CheckpointFormatError

STREAM_NAMES = ("data_order", "noise", "time", "dropout")


class RandomStreams:
    def __init__(self, seed: int) -> None:
        children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
        self._generators: Dict[str, np.random.Generator] = {
            name: np.random.Generator(np.random.PCG64(child)) for name, child in zip(STREAM_NAMES, children)
        }

    @property
    def data_order(self) -> np.random.Generator:
        return self._generators["data_order"]

    @property
    def noise(self) -> np.random.Generator:
        return self._generators["noise"]

    @property
    def time(self) -> np.random.Generator:
        return self._generators["time"]

    @property
    def dropout(self) -> np.random.Generator:
        return self._generators["dropout"]

    def state(self) -> Dict[str, Any]:
        return {name: copy.deepcopy(gen.bit_generator.state) for name, gen in self._generators.items()}

    def restore(self, state: Dict[str, Any]) -> None:
        missing = [name for name in STREAM_NAMES if name not in state]
        if missing:
            raise CheckpointFormatError(f"Random-stream state is missing {missing}")
        for name in STREAM_NAMES:
            self._generators[name].bit_generator.state = copy.deepcopy(state[name])
