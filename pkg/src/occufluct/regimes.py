"""Closed-form algebra of the (d, alpha, beta, gamma) parameter space.

Classifies parameter tuples into the limit-theorem cases, exposes the
critical dimensions, the norming schedules F_T, the high-density
requirements on H_T, and the extinction taxonomy.  Everything here is
exact arithmetic on the parameters; no simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class RegimeCase(Enum):
    LOWDIM_GAMMA_LT_D = "LowDim_GammaLtD"
    LOWDIM_GAMMA_GE_D = "LowDim_GammaGeD"
    CRIT_A = "Crit_A"
    CRIT_B_I = "Crit_B_i"
    CRIT_B_II = "Crit_B_ii"
    CRIT_B_III = "Crit_B_iii"
    CRIT_B_IV = "Crit_B_iv"
    HIGH_A = "High_A"
    HIGH_B = "High_B"
    HIGH_C = "High_C"
    UNCLASSIFIED = "Unclassified"


class LimitProcess(Enum):
    XI = "Xi"
    ZETA = "Zeta"
    ETA = "Eta"
    VARTHETA = "Vartheta"
    HIGHDIM_INDEP_INCREMENTS = "HighDimIndepIncrements"
    HIGHDIM_TIME_CONSTANT = "HighDimTimeConstant"


class ExtinctionKind(Enum):
    AS_LOCAL_EXTINCTION_PROVED = "ASLocalExtinction_Proved"
    NO_AS_LOCAL_EXTINCTION = "NoASLocalExtinction"
    CONJECTURED_AS_LOCAL_EXTINCTION = "Conjectured_ASLocalExtinction"
    GLOBAL_FINITE_EXTINCTION = "GlobalFiniteExtinction"
    FINITE_TOTAL_OCCUPATION = "FiniteTotalOccupation"


@dataclass(frozen=True)
class ModelParams:
    """The model quadruple plus the branching rate V.

    d is the spatial dimension; non-integer d is accepted for parameter
    sweeps but flagged as not simulateable.
    """

    d: float
    alpha: float
    beta: float
    gamma: float
    v_rate: float = 1.0

    def __post_init__(self):
        if not (0 < self.alpha <= 2):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (0 < self.beta <= 1):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.v_rate <= 0:
            raise ValueError(f"v_rate must be > 0, got {self.v_rate}")

    @property
    def simulateable(self) -> bool:
        return float(self.d).is_integer() and 1 <= self.d <= 3


@dataclass(frozen=True)
class NormingExponents:
    """F_T^(1+beta) = H_T * T^t_power * (log T)^log_power.

    h_power is always 1 and root flag records the final 1/(1+beta) root;
    both are kept explicit so the record expands to the published normings
    without consulting the case id.
    """

    t_power: float
    log_power: float
    h_power: float = 1.0
    stable_root: bool = True  # F_T = (.)^(1/(1+beta))


@dataclass(frozen=True)
class HighDensityCondition:
    """Requirement lim_T T^t_exp (log T)^log_exp / H_T^beta = 0.

    ``None`` exponents mean no condition beyond H_T >= 1.  Schedules are
    restricted to the two-parameter family H_T = T^h (log T)^l, for which
    pass/fail is decided symbolically.
    """

    t_exp: Optional[float]
    log_exp: Optional[float]
    beta: float
    text: str = ""

    @property
    def trivial(self) -> bool:
        return self.t_exp is None

    def evaluate_schedule(self, h: float, log_l: float = 0.0) -> bool:
        """True iff H_T = T^h (log T)^log_l satisfies the condition."""
        if self.trivial:
            return True
        lead = self.t_exp - self.beta * h
        if lead < 0:
            return True
        if lead > 0:
            return False
        return self.log_exp - self.beta * log_l < 0

    @property
    def h1_sufficient(self) -> bool:
        """Whether the constant schedule H_T = 1 already passes."""
        return self.evaluate_schedule(0.0, 0.0)


@dataclass(frozen=True)
class RegimeReport:
    params: ModelParams
    case_id: RegimeCase
    d_crit: float                      # interior critical dimension
    d_crit_finite_measure: float       # gamma > d replacement threshold
    f_t_exponents: NormingExponents
    density_condition: HighDensityCondition
    limit_process_id: LimitProcess
    selfsim_index: Optional[float] = None
    dependence_exponent: Optional[float] = None
    selfsim_sign_flag: bool = False    # printed-index sign discrepancy carried
    notes: tuple = field(default_factory=tuple)

    @property
    def hd_required(self) -> bool:
        return not self.density_condition.h1_sufficient


@dataclass(frozen=True)
class ExtinctionReport:
    params: ModelParams
    kind: ExtinctionKind
    threshold: float  # alpha/beta + gamma


def critical_dimension(params: ModelParams) -> tuple[float, float]:
    """(interior, finite-measure) critical dimensions.

    Interior value alpha*(2+beta)/beta - (gamma v alpha)/beta governs the
    gamma < d range; for gamma > d the relevant threshold is
    alpha*(2+beta)/(1+beta).
    """
    a, b, g = params.alpha, params.beta, params.gamma
    interior = a * (2 + b) / b - max(g, a) / b
    finite_measure = a * (2 + b) / (1 + b)
    return interior, finite_measure


def selfsim_index_lowdim(params: ModelParams) -> float:
    """Self-similarity index of the low-dimension limit.

    Derived by rescaling the stable-integral kernel under
    (r, x) -> (c r, c^(1/alpha) x); equals the T-exponent of F_T with
    H_T = 1.  The printed statement carries the opposite sign on gamma;
    the kernel-scaling oracle in limits.oracle adjudicates numerically.
    """
    d, a, b, g = params.d, params.alpha, params.beta, params.gamma
    return (2 + b - (d * b + g) / a) / (1 + b)


def dependence_exponent_formula(params: ModelParams) -> float:
    """Long-range dependence exponent kappa of the low-dimension limit."""
    d, a, b, g = params.d, params.alpha, params.beta, params.gamma
    if a == 2 or b > (d - g) / (d + a):
        return d / a
    return (d / a) * (1 + b - (d - g) / (d + a))


def _close(a: float, b: float) -> bool:
    # boundary ties route to the critical cases; parameters are
    # human-entered decimals, so relative 1e-9 equality is the tie rule
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def classify_regime(params: ModelParams) -> RegimeReport:
    d, a, b, g = params.d, params.alpha, params.beta, params.gamma
    d_int, d_fin = critical_dimension(params)
    notes = []
    if not float(d).is_integer():
        notes.append("analytic continuation, not simulateable")

    if g < d and not _close(g, d):
        if d < d_int and not _close(d, d_int):
            case = RegimeCase.LOWDIM_GAMMA_LT_D
            exps = NormingExponents(2 + b - (d * b + g) / a, 0.0)
            cond = HighDensityCondition(
                1 - (d - g) * b / a, 0.0, b,
                text="lim T^(1-(d-gamma)beta/alpha) / H_T^beta = 0",
            )
            limit = LimitProcess.XI
            return RegimeReport(
                params, case, d_int, d_fin, exps, cond, limit,
                selfsim_index=selfsim_index_lowdim(params),
                dependence_exponent=dependence_exponent_formula(params),
                selfsim_sign_flag=(g > 0),
                notes=tuple(notes),
            )
        if _close(d, d_int):
            if g < a and not _close(g, a):
                case, exps = RegimeCase.CRIT_A, NormingExponents(1 - g / a, 1.0)
                cond = HighDensityCondition(None, None, b, text="H_T >= 1")
                limit = LimitProcess.ETA
            elif _close(g, a):
                case, exps = RegimeCase.CRIT_B_I, NormingExponents(0.0, 2.0)
                cond = HighDensityCondition(
                    0.0, 1 - b, b,
                    text="lim (log T)^(1-beta) / H_T^beta = 0",
                )
                limit = LimitProcess.VARTHETA
            else:
                case, exps = RegimeCase.CRIT_B_II, NormingExponents(0.0, 1.0)
                cond = HighDensityCondition(
                    (1 + b) * (g / a - 1), -(1 + b), b,
                    text="lim T^((1+beta)(gamma/alpha-1)) / "
                         "(H_T^beta (log T)^(1+beta)) = 0",
                )
                limit = LimitProcess.VARTHETA
        else:
            if g < a and not _close(g, a):
                case, exps = RegimeCase.HIGH_A, NormingExponents(1 - g / a, 0.0)
                cond = HighDensityCondition(None, None, b, text="H_T >= 1")
                limit = LimitProcess.HIGHDIM_INDEP_INCREMENTS
            elif _close(g, a):
                case, exps = RegimeCase.HIGH_B, NormingExponents(0.0, 1.0)
                cond = HighDensityCondition(None, None, b, text="H_T >= 1")
                limit = LimitProcess.HIGHDIM_TIME_CONSTANT
            else:
                case, exps = RegimeCase.HIGH_C, NormingExponents(0.0, 0.0)
                cond = HighDensityCondition(
                    1.0, 0.0, b, text="lim T H_T^(-beta) = 0")
                limit = LimitProcess.HIGHDIM_TIME_CONSTANT
        return RegimeReport(params, case, d_int, d_fin, exps, cond, limit,
                            notes=tuple(notes))

    # gamma >= d: thresholds from the finite-measure critical dimension
    if d < d_fin and not _close(d, d_fin):
        case = RegimeCase.LOWDIM_GAMMA_GE_D
        k_log = 1.0 if _close(g, d) else 0.0   # k(T) = log T on the boundary
        exps = NormingExponents(2 + b - (1 + b) * d / a, k_log)
        cond = HighDensityCondition(
            1.0, b * k_log, b, text="lim T / (H_T k(T))^beta = 0")
        limit = LimitProcess.ZETA
        return RegimeReport(
            params, case, d_int, d_fin, exps, cond, limit,
            dependence_exponent=d / a,
            notes=tuple(notes),
        )
    if _close(d, d_fin):
        if _close(g, d):
            case, exps = RegimeCase.CRIT_B_III, NormingExponents(0.0, 2.0)
            cond = HighDensityCondition(
                1.0, -(1 + 2 * b), b,
                text="lim T / (H_T^beta (log T)^(1+2beta)) = 0",
            )
        else:
            case, exps = RegimeCase.CRIT_B_IV, NormingExponents(0.0, 1.0)
            cond = HighDensityCondition(
                1.0, 0.0, b, text="lim T H_T^(-beta) = 0")
        return RegimeReport(params, case, d_int, d_fin, exps, cond,
                            LimitProcess.VARTHETA, notes=tuple(notes))
    case, exps = RegimeCase.HIGH_C, NormingExponents(0.0, 0.0)
    cond = HighDensityCondition(1.0, 0.0, b, text="lim T H_T^(-beta) = 0")
    return RegimeReport(params, case, d_int, d_fin, exps, cond,
                        LimitProcess.HIGHDIM_TIME_CONSTANT, notes=tuple(notes))


def norming_factor(report: RegimeReport, T: float, H_T: float = 1.0) -> float:
    """F_T = (H_T T^a (log T)^b)^(1/(1+beta)) for the report's (a, b)."""
    if T <= 1:
        raise ValueError(f"T must exceed 1 so that log T > 0, got {T}")
    if H_T < 1:
        raise ValueError(f"H_T must be >= 1, got {H_T}")
    e = report.f_t_exponents
    b = report.params.beta
    val = (H_T ** e.h_power) * T ** e.t_power * math.log(T) ** e.log_power
    return val ** (1.0 / (1.0 + b))


def high_density_condition(report: RegimeReport) -> HighDensityCondition:
    return report.density_condition


def extinction_classification(params: ModelParams) -> ExtinctionReport:
    """Extinction taxonomy; exactly one kind per parameter tuple.

    The chain is ordered so the kinds are mutually exclusive.  The final
    branch extends the no-extinction statement to the gamma = alpha
    boundary, where H_T = 1 is still admissible in the high-dimension
    theorem and the infinite-total-occupation argument goes through.
    """
    d, a, b, g = params.d, params.alpha, params.beta, params.gamma
    threshold = a / b + g
    if g > d and not _close(g, d):
        kind = ExtinctionKind.GLOBAL_FINITE_EXTINCTION
    elif min(g, d) > a and not _close(min(g, d), a):
        kind = ExtinctionKind.FINITE_TOTAL_OCCUPATION
    elif a == 2 and d < 2 / b + g and not _close(d, 2 / b + g):
        kind = ExtinctionKind.AS_LOCAL_EXTINCTION_PROVED
    elif a < 2 and d < threshold and not _close(d, threshold):
        kind = ExtinctionKind.CONJECTURED_AS_LOCAL_EXTINCTION
    else:
        kind = ExtinctionKind.NO_AS_LOCAL_EXTINCTION
    return ExtinctionReport(params, kind, threshold)
