"""Small shared helpers."""

from __future__ import annotations

import numpy as np


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic sub-seed: SeedSequence entropy = [master_seed, index].

    Used to give clusters, weight generators, and input streams independent
    random streams that can be reproduced in isolation.
    """
    ss = np.random.SeedSequence(entropy=[int(master_seed) & (2**63 - 1), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])
