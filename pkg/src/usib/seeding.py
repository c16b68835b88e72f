"""Named random substreams derived from one run seed.

Every stage of a run (data generation, encoder training, explainer
training, evaluation) draws from its own generator, derived from the run
seed and a stable label hash. Changing what one stage consumes therefore
never perturbs another stage.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Return a generator for ``label`` derived deterministically from ``seed``."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(label.encode("utf-8"))]))
