"""Relaxation and chattering solver for ``min int_0^T [a(t).u + f(u')] dt``.

Typical use::

    from noncoercive import SampledFunction, LinearTerm, ProblemSpec, solve

    f = SampledFunction.from_callable(lambda x: (x**2 - 1) ** 2, -2, 2, 0.5)
    res = solve(ProblemSpec(1.0, 0.0, 0.0, LinearTerm.zero(), f))
    res.report.cost_f, res.trajectory.u
"""

from .convex import (
    CaratheodoryCombo,
    ConvexPiecewise,
    ConvexPolyhedral,
    Face,
    SampledFunction,
    caratheodory_decompose,
    convex_envelope,
    legendre_conjugate,
    subdifferential,
)
from .errors import (
    CertificateFailure,
    ComboMismatch,
    DecompositionFailure,
    DegenerateInput,
    DualDomainExceeded,
    InfeasibleGrid,
    InfeasibleSelection,
    NoMinimizer,
    ProblemFileError,
    SolverError,
)
from .growth import GrowthProfile, Verdict, check_growth, classify_class_f, growth_profile
from .oracle import DPGrid, DPResult, dp_minimize
from .pipeline import SolveResult, solve
from .problem import LinearTerm, ProblemSpec
from .recovery import SolveReport, Trajectory, assemble, chatter, detachment_set
from .relaxed import (
    AccumulatedTerm,
    RelaxedSolution,
    accumulate,
    dual_value,
    maximize_dual,
    primal_selection,
    solve_relaxed,
)

__version__ = "0.1.0"
