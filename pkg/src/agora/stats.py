"""t-tests and the Student t CDF they rest on.

The CDF goes through the regularized incomplete beta function, evaluated with
the modified Lentz continued fraction::

    P(T <= x) = 1 - I_{df/(df+x^2)}(df/2, 1/2) / 2     for x >= 0

and by symmetry for x < 0.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

from agora import data
from agora.errors import DegenerateVariance, DomainError, StatsError, TooFewObservations

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 20000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz's method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise StatsError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float, *, one_minus_x: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``one_minus_x`` may be passed when 1 - x is known more accurately than
    the subtraction would give.
    """
    if a <= 0 or b <= 0:
        raise DomainError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError("betainc needs 0 <= x <= 1")
    y = 1.0 - x if one_minus_x is None else one_minus_x
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def t_cdf(x: float, df: float) -> float:
    """P(T <= x) for Student's t with ``df`` (possibly fractional) degrees of freedom."""
    if not df > 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    if x == 0:
        return 0.5
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    x2 = x * x
    # tail = P(T > |x|)
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + x2), one_minus_x=x2 / (df + x2))
    return 1.0 - tail if x > 0 else tail


def t_sf(x: float, df: float) -> float:
    return t_cdf(-x, df)


class Tail(str, Enum):
    TWO = "two"
    GREATER = "one_greater"
    LESS = "one_less"


def p_value(t: float, df: float, tail: Tail | str) -> float:
    tail = Tail(tail)
    if tail is Tail.TWO:
        return min(1.0, 2.0 * t_cdf(-abs(t), df))
    if tail is Tail.GREATER:
        return t_cdf(-t, df)
    return t_cdf(t, df)


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]
    label: str = ""

    def __init__(self, values: Iterable[float], label: str = ""):
        object.__setattr__(self, "values", tuple(float(v) for v in values))
        object.__setattr__(self, "label", label)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.values)

    @property
    def sd(self) -> float:
        return statistics.stdev(self.values) if len(self.values) > 1 else 0.0


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    tail: Tail
    p: float
    means: tuple[float, ...]
    sds: tuple[float, ...]
    ns: tuple[int, ...] = ()
    test: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "test": self.test,
            "t": self.t,
            "df": self.df,
            "tail": self.tail.value,
            "p": self.p,
            "means": list(self.means),
            "sds": list(self.sds),
            "ns": list(self.ns),
        }


def _as_sample(a) -> Sample:
    return a if isinstance(a, Sample) else Sample(a)


def welch_two_sample(a, b, tail: Tail | str = Tail.TWO) -> TTestResult:
    a, b = _as_sample(a), _as_sample(b)
    if len(a) < 2 or len(b) < 2:
        raise TooFewObservations("Welch test needs at least 2 observations per sample")
    va, vb = statistics.variance(a.values), statistics.variance(b.values)
    if va == 0 and vb == 0:
        raise DegenerateVariance("both samples have zero variance")
    na, nb = len(a), len(b)
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    denom = qa * qa / (na - 1) + qb * qb / (nb - 1)
    if se2 == 0 or denom == 0:
        # variances so small that their squares underflow
        raise DegenerateVariance("sample variances underflow")
    t = (a.mean - b.mean) / math.sqrt(se2)
    df = se2 * se2 / denom
    tail = Tail(tail)
    return TTestResult(t, df, tail, p_value(t, df, tail), (a.mean, b.mean), (a.sd, b.sd), (na, nb), "welch")


def one_sample_t(a, mu: float, tail: Tail | str = Tail.TWO) -> TTestResult:
    a = _as_sample(a)
    if len(a) < 2:
        raise TooFewObservations("one-sample test needs at least 2 observations")
    sd = statistics.stdev(a.values)
    if sd == 0:
        raise DegenerateVariance("sample has zero variance")
    n = len(a)
    t = (a.mean - mu) / (sd / math.sqrt(n))
    df = float(n - 1)
    tail = Tail(tail)
    return TTestResult(t, df, tail, p_value(t, df, tail), (a.mean,), (sd,), (n,), "one_sample")


# -- baselines and summaries ------------------------------------------------------


class BaselineKind(str, Enum):
    ABSOLUTE = "absolute_mean"
    DIFFERENCE = "difference_only"
    AGENT_REFERENCE = "agent_reference"


@dataclass(frozen=True)
class HumanBaseline:
    treatment: str
    value: float
    kind: BaselineKind = BaselineKind.ABSOLUTE
    note: str = ""

    def render(self) -> str:
        pct = self.value * 100
        if self.kind is BaselineKind.DIFFERENCE:
            return f"{pct:+.0f}% (difference only)"
        if self.kind is BaselineKind.AGENT_REFERENCE:
            return f"{pct:.0f}% (agent reference)"
        return f"{pct:.0f}%"


def load_baselines() -> dict[str, HumanBaseline]:
    table = data.load("baselines.json")
    return {
        b["treatment"]: HumanBaseline(b["treatment"], float(b["value"]), BaselineKind(b["kind"]), b.get("note", ""))
        for b in table["baselines"]
    }


@dataclass(frozen=True)
class Comparison:
    groups: tuple[str, ...]
    test: str = "welch"  # or "one_sample"
    tail: Tail = Tail.TWO
    baseline: str | None = None

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Comparison:
        return cls(tuple(d["groups"]), d.get("test", "welch"), Tail(d.get("tail", "two")), d.get("baseline"))


@dataclass
class SummaryRow:
    label: str
    n: int
    mean: float
    sd: float
    human: str = ""
    run_mean: float | None = None
    n_runs: int | None = None


@dataclass
class ComparisonRow:
    comparison: Comparison
    result: TTestResult | None
    error: str = ""


@dataclass
class Summary:
    rows: list[SummaryRow] = field(default_factory=list)
    comparisons: list[ComparisonRow] = field(default_factory=list)


def summarize_experiment(
    groups: Mapping[str, Sample],
    baselines: Sequence[HumanBaseline] | Mapping[str, HumanBaseline] = (),
    comparisons: Sequence[Comparison] = (),
    run_means: Mapping[str, Sample] | None = None,
) -> Summary:
    """Descriptive rows per group plus one t-test row per declared comparison.

    A baseline whose ``treatment`` equals a group label is shown beside it.
    ``run_means`` optionally carries per-run averages for the same groups.
    """
    if not groups:
        raise StatsError("no groups to summarize")
    if not isinstance(baselines, Mapping):
        baselines = {b.treatment: b for b in baselines}
    summary = Summary()
    for label, sample in groups.items():
        row = SummaryRow(label, len(sample), sample.mean if len(sample) else float("nan"), sample.sd)
        if label in baselines:
            row.human = baselines[label].render()
        if run_means and label in run_means and len(run_means[label]):
            row.run_mean = run_means[label].mean
            row.n_runs = len(run_means[label])
        summary.rows.append(row)
    for comp in comparisons:
        try:
            if comp.test == "one_sample":
                mu = baselines[comp.baseline].value
                res = one_sample_t(groups[comp.groups[0]], mu, comp.tail)
            else:
                res = welch_two_sample(groups[comp.groups[0]], groups[comp.groups[1]], comp.tail)
            summary.comparisons.append(ComparisonRow(comp, res))
        except (StatsError, KeyError) as exc:
            summary.comparisons.append(ComparisonRow(comp, None, f"{type(exc).__name__}: {exc}"))
    return summary
