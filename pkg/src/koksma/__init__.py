"""Star discrepancy, Hardy-Krause variation and analytical generalization-gap bounds."""

from .bounds import (
    ClosedForm,
    GapBoundReport,
    Numeric,
    classwise_bound,
    gap_exact,
    hoeffding_term,
    koksma_hlawka_bound,
    verify_thm1_identity,
    zero_one_tightness,
)
from .discrepancy import (
    DiscrepancyResult,
    ReferenceBoundParams,
    local_discrepancy,
    prop2_bound,
    prop2_delta,
    prop3_bound,
    scaling_study,
    star_discrepancy,
    star_discrepancy_exact,
    star_discrepancy_lower_bound,
    uniform_iid_bound,
)
from .errors import BudgetExceeded, KoksmaError, ValidationError
from .function import FunctionHandle
from .linreg import (
    compute_M,
    fit_least_squares,
    make_instance,
    remark5_rates,
    sample_training,
    verify_thm2,
    verify_thm3,
)
from .measure import (
    AtomicMeasure,
    BoxMixture,
    ProductMeasure,
    SignedAtomicMeasure,
    closed_mass,
    empirical,
    f_from_signed,
    open_mass,
    pushforward_atomic,
    total_variation,
    uniform,
)
from .point_set import MapSpec, PointSet, apply_map, equispaced_centers, halton, van_der_corput
from .variation import (
    derivative_variation_bound,
    hardy_krause_variation,
    restrict,
    thm2_variation_bound,
    thm3_variation_bound,
    vitali_variation,
)

__version__ = "0.1.0"
