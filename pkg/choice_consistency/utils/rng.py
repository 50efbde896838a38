"""
Seeded random streams.
Each consumer gets its own counter-based Philox stream keyed by (seed, label),
so batch results do not depend on worker scheduling.
"""

import hashlib
from typing import List

import numpy as np


def label_words(label: str) -> List[int]:
    """Stable 32-bit words derived from a label (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, label: str = "") -> np.random.Generator:
    """Generator for one (seed, label) pair."""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *label_words(label)])
    return np.random.Generator(np.random.Philox(sequence))
