"""Compare attribution vectors: normalization, Manhattan error, tau-b, RBO.

External attribution methods report signed weights on arbitrary scales;
``normalize_abs`` maps any vector into [0, 1] by absolute value so vectors
from different methods are comparable. Rankings order features by value
descending with ties broken by ascending feature id, deterministically.
Kendall's tau is the tie-corrected tau-b computed on the value vectors (not
pre-ranked lists); rank-biased overlap is the extrapolated variant over the
full-depth rankings.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .attribution import AttributionVector, manhattan
from .errors import ContractError, UndefinedMetricError

VectorLike = Union[AttributionVector, Sequence[float]]


def _values(vec: VectorLike) -> tuple[float, ...]:
    if isinstance(vec, AttributionVector):
        return vec.values
    return tuple(float(x) for x in vec)


@dataclass(frozen=True)
class Ranking:
    """Feature ids sorted by attribution value descending, ties by ascending id."""

    order: tuple[int, ...]
    values: tuple[float, ...]

    @classmethod
    def of(cls, vec: VectorLike) -> "Ranking":
        values = _values(vec)
        order = tuple(sorted(range(len(values)), key=lambda i: (-values[i], i)))
        return cls(order=order, values=values)


def normalize_abs(vec: AttributionVector) -> AttributionVector:
    """Absolute values scaled by the largest one; all-zero stays all-zero."""
    magnitudes = tuple(abs(x) for x in vec.values)
    peak = max(magnitudes, default=0.0)
    if peak == 0.0:
        return AttributionVector(magnitudes, vec.source, vec.basis, vec.complete)
    return AttributionVector(
        tuple(x / peak for x in magnitudes), vec.source, vec.basis, vec.complete
    )


def manhattan_error(a: VectorLike, b: VectorLike) -> float:
    """Sum of absolute per-feature differences. Caller normalizes first."""
    return manhattan(_values(a), _values(b))


def kendall_tau(a: VectorLike, b: VectorLike) -> float:
    """Tie-corrected tau-b over two value vectors.

    (C - D) / sqrt((P - T_a)(P - T_b)) with P = m(m-1)/2 pairs, C/D the
    concordant/discordant counts and T the per-side tied-pair counts.
    Undefined (error) when either side is constant.
    """
    x = np.asarray(_values(a), dtype=np.float64)
    y = np.asarray(_values(b), dtype=np.float64)
    if x.shape != y.shape:
        raise ContractError(f"length mismatch: {x.size} vs {y.size}")
    m = x.size
    if m < 2:
        raise ContractError("tau needs at least two features")
    iu = np.triu_indices(m, k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    prod = sx * sy
    concordant = int((prod > 0).sum())
    discordant = int((prod < 0).sum())
    pairs = m * (m - 1) // 2
    ties_a = int((sx == 0).sum())
    ties_b = int((sy == 0).sum())
    denom = math.sqrt((pairs - ties_a) * (pairs - ties_b))
    if denom == 0.0:
        raise UndefinedMetricError("tau is undefined when a vector is constant")
    return (concordant - discordant) / denom


def rbo(a: VectorLike, b: VectorLike, p: float = 0.9) -> float:
    """Extrapolated rank-biased overlap of the two full-depth rankings.

    Prefix agreements A_d = |S_:d ∩ T_:d| / d are accumulated for d = 1..m
    and the tail beyond depth m is extrapolated at the final agreement
    (which is 1: both rankings permute the same feature ids).
    """
    if not 0.0 < p < 1.0:
        raise ContractError(f"persistence must lie in (0, 1), got {p}")
    va, vb = _values(a), _values(b)
    if len(va) != len(vb):
        raise ContractError(f"length mismatch: {len(va)} vs {len(vb)}")
    m = len(va)
    if m == 0:
        raise ContractError("rbo needs at least one feature")
    sa = Ranking.of(va).order
    sb = Ranking.of(vb).order
    seen_a: set[int] = set()
    seen_b: set[int] = set()
    overlap = 0
    weighted = 0.0
    for depth in range(1, m + 1):
        ea, eb = sa[depth - 1], sb[depth - 1]
        if ea == eb:
            overlap += 1
        else:
            overlap += (ea in seen_b) + (eb in seen_a)
        seen_a.add(ea)
        seen_b.add(eb)
        weighted += (overlap / depth) * p**depth
    return (overlap / m) * p**m + (1.0 - p) / p * weighted


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    error: float
    tau: float | None  # None when undefined for this pair
    rbo: float


def compare_vectors(
    reference: AttributionVector,
    candidates: Sequence[tuple[str, AttributionVector]],
    rbo_p: float = 0.9,
) -> list[ComparisonRow]:
    """Score candidates against a reference attribution for one instance.

    Candidates are normalized (absolute value, scaled into [0, 1]) first; the
    reference passes through unchanged. An undefined tau is recorded as None
    and later excluded from averages.
    """
    rows = []
    for name, vec in candidates:
        if vec.m != reference.m:
            raise ContractError(
                f"candidate {name!r} has {vec.m} features, reference has {reference.m}"
            )
        cand = normalize_abs(vec)
        try:
            tau = kendall_tau(reference, cand)
        except UndefinedMetricError:
            tau = None
        rows.append(
            ComparisonRow(
                name=name,
                error=manhattan_error(reference, cand),
                tau=tau,
                rbo=rbo(reference, cand, rbo_p),
            )
        )
    return rows


@dataclass(frozen=True)
class AveragedRow:
    name: str
    error: float
    tau: float | None
    rbo: float
    instances: int
    tau_defined: int  # how many per-instance taus entered the average


def average_rows(per_instance: Sequence[Sequence[ComparisonRow]]) -> list[AveragedRow]:
    """Arithmetic per-metric means across instances, per candidate name."""
    if not per_instance:
        return []
    names = [row.name for row in per_instance[0]]
    out = []
    for pos, name in enumerate(names):
        rows = [inst[pos] for inst in per_instance]
        if any(r.name != name for r in rows):
            raise ContractError("instances carry differently ordered candidate lists")
        taus = [r.tau for r in rows if r.tau is not None]
        out.append(
            AveragedRow(
                name=name,
                error=math.fsum(r.error for r in rows) / len(rows),
                tau=(math.fsum(taus) / len(taus)) if taus else None,
                rbo=math.fsum(r.rbo for r in rows) / len(rows),
                instances=len(rows),
                tau_defined=len(taus),
            )
        )
    return out
