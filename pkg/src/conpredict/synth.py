"""Synthetic labeled corpus generator for end-to-end pipeline studies.

Generates one row per pseudo-function with all 51 feature columns (the
24-column concurrency set plus the 27-column sequential baseline set).
Faulty rows receive additive shifts on a fixed list of concurrency
columns (and optionally on sequential columns); everything else is
seeded count-like noise.  The exact planted shifts are returned as
ground-truth metadata so tests can calibrate against them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import ALL_FEATURES, CONC_OPS, SEQ_OPS
from .learning.dataset import Dataset

# Columns shifted upward on faulty rows (concurrency family).
PLANTED_CONCURRENCY = ("CCC", "SVC", "MuS_rmlock", "MuDuE_rmlock", "MuDuK_rmlock")
# Columns shifted when a sequential signal is requested.
PLANTED_SEQUENTIAL = ("CC", "CP", "MuDuE_ssdl")

# Per-unit-strength shifts, in raw feature units.
_COUNT_SHIFT = 8.0
_PERCENT_SHIFT = 75.0


@dataclass(frozen=True)
class SynthSpec:
    n: int = 500
    faulty_fraction: float = 0.1
    concurrency_signal: float = 1.0
    sequential_signal: float = 0.0
    noise: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 instances")
        if not 0.0 < self.faulty_fraction < 1.0:
            raise ValueError("faulty_fraction must be in (0, 1)")
        if self.concurrency_signal < 0 or self.sequential_signal < 0:
            raise ValueError("signal strengths must be non-negative")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


def _is_percent(name: str) -> bool:
    return name.startswith("MuDuE_") or name.startswith("MuDuK_")


def synth(spec: SynthSpec) -> tuple[Dataset, np.ndarray, dict]:
    """Generate (dataset, nloc per row, ground-truth metadata).

    Count columns are drawn around a small base level and quantized to
    integers in [0, 6]; percentage columns (MuDuE/MuDuK) are quantized to
    multiples of 25 in [0, 100].  Planted columns add shift * strength
    before quantization, so a unit concurrency signal cleanly separates
    the classes on the count columns.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    n = spec.n
    n_faulty = max(1, int(round(n * spec.faulty_fraction)))
    if n_faulty >= n:
        raise ValueError("faulty_fraction leaves no non-faulty rows")
    y = np.zeros(n, dtype=np.int64)
    y[:n_faulty] = 1
    y = y[rng.permutation(n)]

    shifts: dict[str, float] = {}
    for name in PLANTED_CONCURRENCY:
        s = spec.concurrency_signal
        shifts[name] = (_PERCENT_SHIFT if _is_percent(name) else _COUNT_SHIFT) * s
    for name in PLANTED_SEQUENTIAL:
        s = spec.sequential_signal
        if s > 0:
            shifts[name] = (_PERCENT_SHIFT if _is_percent(name) else _COUNT_SHIFT) * s

    X = np.empty((n, len(ALL_FEATURES)), dtype=np.float64)
    for j, name in enumerate(ALL_FEATURES):
        z = rng.standard_normal(n)
        shift = shifts.get(name, 0.0) * y
        if _is_percent(name):
            raw = 1.5 + spec.noise * z + shift / 25.0
            col = np.clip(np.round(raw), 0, 4) * 25.0
        else:
            base = 2.0 + (j % 3)  # vary base level a little across columns
            raw = base + spec.noise * z + shift
            col = np.clip(np.round(raw), 0, 6 + np.ceil(shifts.get(name, 0.0)))
        X[:, j] = col

    # Killed percentage can never exceed executed percentage.
    names = list(ALL_FEATURES)
    for op in CONC_OPS + SEQ_OPS:
        e = names.index(f"MuDuE_{op}")
        k = names.index(f"MuDuK_{op}")
        X[:, k] = np.minimum(X[:, k], X[:, e])

    nloc = rng.integers(10, 100, size=n).astype(np.float64)
    keys = tuple(("synth", f"fn_{i:04d}") for i in range(n))
    d = Dataset(ALL_FEATURES, X, y, keys)
    meta = {
        "seed": spec.seed,
        "n": n,
        "n_faulty": int(y.sum()),
        "noise": spec.noise,
        "planted_shifts": shifts,
        "planted_concurrency": list(PLANTED_CONCURRENCY),
        "planted_sequential": [c for c in PLANTED_SEQUENTIAL if c in shifts],
    }
    return d, nloc, meta
