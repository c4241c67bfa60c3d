"""Exception hierarchy shared by all estimator modules.

Every error carries a module-qualified ``code`` (used by the CLI for
machine-readable failure reporting) and an ``exit_code``: 2 for input /
validation problems, 3 for numerical failures discovered mid-computation.
"""


class FurstenbergError(Exception):
    code = "error"
    exit_code = 3


class NonInvertible(FurstenbergError):
    code = "linalg.non_invertible"


class NonFinite(FurstenbergError):
    code = "linalg.non_finite"
    exit_code = 2


class OutOfRange(FurstenbergError):
    code = "linalg.out_of_range"
    exit_code = 2


class DimensionMismatch(FurstenbergError):
    code = "linalg.dimension_mismatch"
    exit_code = 2


class DegenerateImage(FurstenbergError):
    code = "linalg.degenerate_image"


class DegenerateFlag(FurstenbergError):
    code = "linalg.degenerate_flag"


class DegenerateGap(FurstenbergError):
    code = "pingpong.degenerate_gap"


class Overflow(FurstenbergError):
    code = "walk.overflow"


class FitIllConditioned(FurstenbergError):
    code = "boundary.fit_ill_conditioned"


class TooManyDegenerate(FurstenbergError):
    code = "boundary.too_many_degenerate"


class EmptySample(FurstenbergError):
    code = "dimension.empty_sample"
    exit_code = 2


class AllMassesZero(FurstenbergError):
    code = "dimension.all_masses_zero"


class WitnessNotFound(FurstenbergError):
    code = "pingpong.witness_not_found"


class ExactEntriesMissing(FurstenbergError):
    code = "pingpong.exact_entries_missing"
    exit_code = 2


class SchemaMismatch(FurstenbergError):
    code = "cli.schema_mismatch"
    exit_code = 2
