"""Quantitative bound checks for the error-tolerant inversion machinery.

Everything here is finite-size: the asymptotically-negligible part of each
bound is carried explicitly as 2*sqrt(a) * |S ∩ good| / sqrt(|S|) (coarsened
to 2*sqrt(a) * 2^(n/2) inside sweep aggregates), so every check is a concrete
inequality between computed numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .invert import run_av_inv
from .ops import PseudoIdentity, apply_pseudo_identity
from .perm import Permutation, prefix_members
from .qstate import StateVector, make_signed_uniform, support_members

BOUND_TOL = 1e-9
IDENTITY_TOL = 1e-12


def _signed_state(jop: PseudoIdentity, support, flipped) -> StateVector:
    return make_signed_uniform(support, flipped, k=jop.k, n=jop.n)


def error_length(jop: PseudoIdentity, support, flipped=()) -> float:
    """||(J - I) psi|| for the signed uniform state over (support, flipped)."""
    state = _signed_state(jop, support, flipped)
    before = state.amps.copy()
    apply_pseudo_identity(state, jop)
    return float(np.linalg.norm(state.amps - before))


@dataclass(frozen=True)
class BoundReport:
    """One measured quantity against one itemized bound."""

    measured: float
    bound: float
    bad_term: float
    good_term: float
    margin: float
    passed: bool
    support_size: int
    flipped_size: int
    bad_overlap: int
    a: float
    b: float


def check_error_length_bound(jop: PseudoIdentity, support, flipped=()) -> BoundReport:
    """Error length against 2*sqrt(a)*|S∩good|/sqrt(|S|) + 2*sqrt(|S∩bad|/|S|)."""
    members, _ = support_members(support, jop.n)
    t_members, _ = support_members(flipped, jop.n)
    measured = error_length(jop, support, flipped)
    size = members.size
    bad_overlap = jop.count_bad(members)
    good_term = 2.0 * math.sqrt(jop.a) * (size - bad_overlap) / math.sqrt(size)
    bad_term = 2.0 * math.sqrt(bad_overlap / size)
    bound = good_term + bad_term
    margin = bound - measured
    return BoundReport(
        measured=measured,
        bound=bound,
        bad_term=bad_term,
        good_term=good_term,
        margin=margin,
        passed=margin >= -BOUND_TOL,
        support_size=int(size),
        flipped_size=int(t_members.size),
        bad_overlap=bad_overlap,
        a=jop.a,
        b=jop.b,
    )


@dataclass(frozen=True)
class ResidualReport:
    """Decomposition of J psi along psi; the orthogonal part never exceeds the
    error length."""

    alpha: complex
    perp_norm: float
    error_len: float
    margin: float
    passed: bool


def check_residual_bound(jop: PseudoIdentity, support, flipped=()) -> ResidualReport:
    state = _signed_state(jop, support, flipped)
    psi = state.amps.copy()
    apply_pseudo_identity(state, jop)
    alpha = complex(np.vdot(psi, state.amps))
    perp_norm = float(np.linalg.norm(state.amps - alpha * psi))
    err = float(np.linalg.norm(state.amps - psi))
    margin = err - perp_norm
    return ResidualReport(alpha, perp_norm, err, margin, margin >= -BOUND_TOL)


@dataclass(eq=False)
class SweepSummary:
    """Aggregate of a per-x sweep, either of error lengths or of full runs."""

    kind: str            # "error-length" | "inversion-residual"
    n: int
    j: int | None
    x_mode: str          # "exhaustive" | "sampled"
    x_count: int
    a: float
    b: float
    bad_size: int
    # error-length sweeps
    mean_error_len: float | None = None
    max_error_len: float | None = None
    mean_ratio: Fraction | None = None
    expected_ratio: Fraction | None = None
    ratio_exact: bool | None = None
    error_bound: float | None = None
    error_bound_ok: bool | None = None
    # inversion sweeps
    mean_success: float | None = None
    mean_v2: float | None = None
    max_v2: float | None = None
    q: float | None = None
    exceed_threshold: float | None = None
    exceed_count: int | None = None
    residual_bound: float | None = None
    residual_bound_applicable: bool | None = None
    residual_bound_ok: bool | None = None
    markov_count: int | None = None
    markov_limit: float | None = None
    markov_ok: bool | None = None
    v2_values: np.ndarray | None = field(default=None, repr=False)
    success_values: np.ndarray | None = field(default=None, repr=False)

    def markov_check(self, t: float) -> tuple[int, float, bool]:
        """count{v2 > t} against x_count * mean / t, on the measured array."""
        if self.v2_values is None:
            raise ValueError("no per-x residuals recorded")
        if t <= 0:
            raise ValueError("threshold must be positive")
        count = int(np.count_nonzero(self.v2_values > t))
        limit = self.x_count * float(np.mean(self.v2_values)) / t
        return count, limit, count <= limit + BOUND_TOL


def sample_xs(n: int, count: int, seed: int) -> list[int]:
    """Stratified seeded sample of x values, ascending: one draw per equal slice."""
    size = 1 << n
    count = min(count, size)
    rng = np.random.default_rng(seed)
    xs = []
    for i in range(count):
        lo = i * size // count
        hi = (i + 1) * size // count
        xs.append(int(rng.integers(lo, hi)))
    return xs


def good_term_coarse(n: int, a: float) -> float:
    return 2.0 * math.sqrt(a) * 2.0 ** (n / 2)


def expected_error_sweep(
    perm: Permutation,
    jop: PseudoIdentity,
    j: int,
    with_tagged: bool = True,
    xs=None,
) -> SweepSummary:
    """Mean error length over x at stage j, with the exact overlap identity.

    with_tagged sweeps the signed state over (stage set, tagged set); without
    it the plain uniform state over the stage set. Exhaustive sweeps (xs=None)
    check that the mean of |bad ∩ S| / |S| equals |bad| / 2^n exactly and that
    the mean error length stays within 2*sqrt(|bad|/2^n) + 2*sqrt(a)*2^(n/2);
    sampled sweeps get three standard errors of slack on the mean bound.
    """
    n = perm.n
    if jop.n != n:
        raise ValueError(f"operator acts on {jop.n} main qubits but permutation has {n}")
    max_j = n // 2 - 1 if with_tagged else n // 2
    if not 0 <= j <= max_j:
        raise ValueError(f"stage index {j} out of range [0, {max_j}]")
    exhaustive = xs is None
    xs = range(perm.size) if exhaustive else [int(x) for x in xs]
    lengths = []
    ratio_sum = Fraction(0)
    count = 0
    for x in xs:
        support = prefix_members(perm, x, 2 * j)
        flipped = prefix_members(perm, x, 2 * j + 2) if with_tagged else ()
        lengths.append(error_length(jop, support, flipped))
        ratio_sum += Fraction(jop.count_bad(support), support.size)
        count += 1
    lengths = np.asarray(lengths, dtype=np.float64)
    mean_ratio = ratio_sum / count
    expected_ratio = Fraction(jop.bad_size, perm.size)
    mean_len = float(lengths.mean())
    bound = 2.0 * math.sqrt(jop.bad_size / perm.size) + good_term_coarse(n, jop.a)
    slack = BOUND_TOL
    if not exhaustive and count > 1:
        slack += 3.0 * float(lengths.std(ddof=1)) / math.sqrt(count)
    return SweepSummary(
        kind="error-length",
        n=n,
        j=j,
        x_mode="exhaustive" if exhaustive else "sampled",
        x_count=count,
        a=jop.a,
        b=jop.b,
        bad_size=jop.bad_size,
        mean_error_len=mean_len,
        max_error_len=float(lengths.max()),
        mean_ratio=mean_ratio,
        expected_ratio=expected_ratio,
        ratio_exact=(abs(mean_ratio - expected_ratio) <= IDENTITY_TOL) if exhaustive else None,
        error_bound=bound,
        error_bound_ok=mean_len <= bound + slack,
    )


def inversion_residual_stats(
    perm: Permutation,
    jop: PseudoIdentity,
    q: float,
    xs=None,
) -> SweepSummary:
    """Run the error-tolerant inversion per x and aggregate the residuals.

    The residual of a run is sqrt(1 - success probability). On exhaustive
    sweeps the mean must stay within 2n*sqrt(|bad|/2^n) plus the coarse good
    term, whenever that bound is at most 1; the count{residual > 1/q} is also
    checked against the mean via the usual averaging argument.
    """
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    n = perm.n
    exhaustive = xs is None
    xs = range(perm.size) if exhaustive else [int(x) for x in xs]
    v2 = []
    success = []
    for x in xs:
        report = run_av_inv(perm, x, jop)
        v2.append(report.v2_norm)
        success.append(report.success_prob)
    v2 = np.asarray(v2, dtype=np.float64)
    success = np.asarray(success, dtype=np.float64)
    count = v2.size
    mean_v2 = float(v2.mean())
    b_actual = jop.bad_size / perm.size
    bound = 2.0 * n * math.sqrt(b_actual) + n * good_term_coarse(n, jop.a)
    applicable = exhaustive and bound <= 1.0
    threshold = 1.0 / q
    exceed = int(np.count_nonzero(v2 > threshold))
    markov_count, markov_limit, markov_ok = None, None, None
    if mean_v2 > 0:
        markov_count = exceed
        markov_limit = count * mean_v2 * q
        markov_ok = exceed <= markov_limit + BOUND_TOL
    else:
        markov_count, markov_limit, markov_ok = exceed, 0.0, exceed == 0
    return SweepSummary(
        kind="inversion-residual",
        n=n,
        j=None,
        x_mode="exhaustive" if exhaustive else "sampled",
        x_count=count,
        a=jop.a,
        b=jop.b,
        bad_size=jop.bad_size,
        mean_success=float(success.mean()),
        mean_v2=mean_v2,
        max_v2=float(v2.max()),
        q=float(q),
        exceed_threshold=threshold,
        exceed_count=exceed,
        residual_bound=bound,
        residual_bound_applicable=applicable,
        residual_bound_ok=(mean_v2 <= bound + BOUND_TOL) if applicable else None,
        markov_count=markov_count,
        markov_limit=markov_limit,
        markov_ok=markov_ok,
        v2_values=v2,
        success_values=success,
    )


@dataclass(frozen=True)
class DefectProfile:
    """Empirical distribution of pseudo-reflection overlap defects."""

    count: int
    mean: float
    max: float
    quantiles: tuple[tuple[float, float], ...]
    threshold: float          # 2a reference level
    frac_exceeding: float


def sample_pairs(n: int, count: int, seed: int) -> list[tuple[int, int]]:
    """Seeded (x, y_in) pairs for defect profiling."""
    rng = np.random.default_rng(seed)
    size = 1 << n
    return [(int(rng.integers(0, size)), int(rng.integers(0, size))) for _ in range(count)]


def pseudo_reflection_profile(
    perm: Permutation,
    jop: PseudoIdentity,
    j: int,
    pairs,
    quantile_levels=(0.5, 0.9, 0.99),
) -> DefectProfile:
    """Profile |1 - <exact|pseudo>| over basis inputs; reporting only, since
    the doubling of (a, b) under conjugation is a loose estimate."""
    from .ops import measure_reflection_defect

    defects = np.asarray(
        [measure_reflection_defect(perm, jop, j, x, y_in) for x, y_in in pairs],
        dtype=np.float64,
    )
    if defects.size == 0:
        raise ValueError("defect profile needs at least one (x, y_in) pair")
    threshold = 2.0 * jop.a
    quants = tuple((float(lv), float(np.quantile(defects, lv))) for lv in quantile_levels)
    return DefectProfile(
        count=int(defects.size),
        mean=float(defects.mean()),
        max=float(defects.max()),
        quantiles=quants,
        threshold=threshold,
        frac_exceeding=float(np.count_nonzero(defects > threshold) / defects.size),
    )


@dataclass(frozen=True)
class Params:
    """Failure-budget calculus: p sized so that q = r + 1.

    hard_input_count is the guaranteed number of inputs any inverter must fail
    on (with probability above 1/q^2) when the failure ratio is 1/r.
    """

    r: float
    n: int
    p: float
    q: float
    hard_input_count: float


def compute_params(r: float, n: int) -> Params:
    if r < 1:
        raise ValueError(f"failure ratio parameter r must be >= 1, got {r}")
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    p = 4.0 * n * n * (r + 1.0) ** 4
    q = p ** 0.25 / math.sqrt(2.0 * n)
    count = (1 << n) * (1.0 / r - 1.0 / q**2) / (1.0 - 1.0 / q**2)
    return Params(r=float(r), n=int(n), p=p, q=q, hard_input_count=count)


def contradiction_check(r: float) -> bool:
    """Strict inequality (1/r - 1/q^2) / (1 - 1/q^2) > 1/q at q = r + 1."""
    if r < 1:
        raise ValueError(f"failure ratio parameter r must be >= 1, got {r}")
    q = r + 1.0
    return (1.0 / r - 1.0 / q**2) / (1.0 - 1.0 / q**2) > 1.0 / q
