"""Canonical feature rosters for the two competing feature sets."""

from __future__ import annotations

# Static concurrency code metrics (CCM).
CCM = ("SPC", "SVC", "CSC", "CEC", "CCC", "SVD")

# Baseline sequential code metrics (SCM).
SCM = ("CN", "CM", "CL", "CPA", "CTC", "CP", "CC", "ES", "MN")

# Mutation operators, concurrency and sequential families.
CONC_OPS = ("rmlock", "rmwait", "rmsig", "rmjoinyld", "shfecs", "spltecs")
SEQ_OPS = ("ssdl", "swdd", "oasn", "oeba", "olng", "orrn")
ALL_OPS = SEQ_OPS + CONC_OPS


def _mutation_columns(ops: tuple[str, ...]) -> tuple[str, ...]:
    return (
        tuple(f"MuS_{op}" for op in ops)
        + tuple(f"MuDuE_{op}" for op in ops)
        + tuple(f"MuDuK_{op}" for op in ops)
    )


# ConPredictor set: 6 CCM + 6 static + 12 dynamic concurrency-mutation
# metrics = 24 columns.
CONPREDICTOR_FEATURES = CCM + _mutation_columns(CONC_OPS)

# Sequential baseline (SPM) set: 9 SCM + 6 static + 12 dynamic
# sequential-mutation metrics = 27 columns.
SPM_FEATURES = SCM + _mutation_columns(SEQ_OPS)

ALL_FEATURES = CONPREDICTOR_FEATURES + SPM_FEATURES

assert len(CONPREDICTOR_FEATURES) == 24
assert len(SPM_FEATURES) == 27
