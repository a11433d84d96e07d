"""Anytime enumeration of abductive (AXp) and contrastive (CXp) explanations.

An AXp is a subset-minimal feature set whose fixed instance values force the
prediction over the whole feature space; a CXp is a subset-minimal set whose
freeing admits a class-changing completion. The two families are each other's
minimal hitting sets, and the enumeration loop exploits that: it repeatedly
asks the hitting-set engine for a new candidate (a minimal hitting set of the
collected duals that is not a superset of any collected target), tests the
candidate with the exact oracle, and records either the candidate or a dual
explanation extracted from its complement. When no candidate exists the
report is complete and certified by duality.

The loop is anytime: wall-clock, explanation-count, and oracle-call budgets
stop it between oracle calls, so every recorded explanation is fully
verified. All iteration orders are deterministic (ascending feature ids
unless an explicit scan order is given), which makes reports reproducible
and gives growing budgets prefix-compatible results.
"""

import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .cells import GRID_CAP, class_grid, grid_size
from .errors import CapacityError, ContractError
from .model import Instance, Model, TreeEnsemble, evaluate
from .oracle import _find_counterexample_unchecked, _tree_oracle

AXP = "axp"
CXP = "cxp"


@dataclass(frozen=True)
class Explanation:
    kind: str  # "axp" | "cxp"
    features: frozenset[int]
    instance: Instance
    class_id: int
    discovery_index: int
    discovery_time: float
    oracle_calls: int  # cumulative count when this set was recorded

    def sorted_features(self) -> tuple[int, ...]:
        return tuple(sorted(self.features))


@dataclass(frozen=True)
class Budget:
    """Stopping rules for an enumeration session.

    At least one limit must be set unless ``unbounded`` is explicitly
    requested; an unbounded session runs until the hitting-set engine proves
    completeness.
    """

    seconds: float | None = None
    max_axps: int | None = None
    max_cxps: int | None = None
    max_oracle_calls: int | None = None
    unbounded: bool = False

    def __post_init__(self):
        limits = (self.seconds, self.max_axps, self.max_cxps, self.max_oracle_calls)
        if self.unbounded and any(l is not None for l in limits):
            raise ContractError("an unbounded budget cannot carry limits")
        if not self.unbounded and all(l is None for l in limits):
            raise ContractError("set at least one budget limit or request unbounded=True")

    @classmethod
    def unlimited(cls) -> "Budget":
        return cls(unbounded=True)


class BudgetExceeded(Exception):
    """Internal control flow: the budget tripped between oracle calls."""


class _Clock:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.t0 = time.perf_counter()
        self.calls = 0

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def before_call(self) -> None:
        b = self.budget
        if b.seconds is not None and self.elapsed() >= b.seconds:
            raise BudgetExceeded
        if b.max_oracle_calls is not None and self.calls >= b.max_oracle_calls:
            raise BudgetExceeded
        self.calls += 1


@dataclass(frozen=True)
class EnumerationReport:
    """Everything one session collected, with budget accounting."""

    instance: Instance
    class_id: int
    mode: str
    complete: bool
    axps: tuple[Explanation, ...]
    cxps: tuple[Explanation, ...]
    oracle_calls: int
    wall_time: float
    budget: Budget

    def axp_sets(self) -> list[frozenset[int]]:
        return [e.features for e in self.axps]

    def cxp_sets(self) -> list[frozenset[int]]:
        return [e.features for e in self.cxps]

    def events(self) -> list[Explanation]:
        return sorted(self.axps + self.cxps, key=lambda e: e.discovery_index)


# --- minimal hitting sets -----------------------------------------------------


def _hits_all(candidate: set[int], sets: Sequence[frozenset[int]]) -> bool:
    return all(candidate & s for s in sets)


class _BlockTracker:
    """Incremental 'would adding this feature swallow a blocked set' queries.

    remaining[b] counts the elements of blocked[b] not yet chosen; a candidate
    is dead exactly when some remaining count reaches zero, and an addition is
    forbidden when it would drop a count from one to zero.
    """

    def __init__(self, blocked: Sequence[frozenset[int]]):
        self.remaining = [len(b) for b in blocked]
        self.containing: dict[int, list[int]] = {}
        for idx, b in enumerate(blocked):
            for fid in b:
                self.containing.setdefault(fid, []).append(idx)

    def forbidden(self, fid: int) -> bool:
        remaining = self.remaining
        for idx in self.containing.get(fid, ()):
            if remaining[idx] == 1:
                return True
        return False

    def add(self, fid: int) -> None:
        for idx in self.containing.get(fid, ()):
            self.remaining[idx] -= 1

    def remove(self, fid: int) -> None:
        for idx in self.containing.get(fid, ()):
            self.remaining[idx] += 1


def minimal_hs(
    to_hit: Sequence[frozenset[int]],
    blocked: Sequence[frozenset[int]],
    m: int,
) -> frozenset[int] | None:
    """A subset-minimal hitting set of ``to_hit`` that contains no blocked set.

    Greedy growth (most new sets hit, ties to the lowest feature id, additions
    that would swallow a blocked set skipped) with an exact branching fallback
    when the greedy paints itself into a corner, then ascending-id shrinking.
    Shrinking cannot re-introduce a blocked set: subsets of non-supersets are
    non-supersets. Returns None iff no hitting set avoids the blocked sets.
    """
    for s in to_hit:
        if not s <= frozenset(range(m)):
            raise ContractError(f"set {sorted(s)} outside feature universe 0..{m - 1}")
    if any(len(b) == 0 for b in blocked):
        return None  # everything is a superset of the empty set
    if any(len(s) == 0 for s in to_hit):
        return None  # the empty set cannot be hit
    candidate = _greedy_hs(to_hit, blocked)
    if candidate is None:
        candidate = _exact_hs(to_hit, blocked)
        if candidate is None:
            return None
    for fid in sorted(candidate):
        trial = candidate - {fid}
        if _hits_all(trial, to_hit):
            candidate = trial
    return frozenset(candidate)


def _greedy_hs(to_hit, blocked) -> set[int] | None:
    tracker = _BlockTracker(blocked)
    chosen: set[int] = set()
    unhit = list(to_hit)
    while unhit:
        counts: dict[int, int] = {}
        for s in unhit:
            for fid in s:
                counts[fid] = counts.get(fid, 0) + 1
        best, best_fid = 0, None
        for fid in sorted(counts):
            if counts[fid] > best and not tracker.forbidden(fid):
                best, best_fid = counts[fid], fid
        if best_fid is None:
            return None
        chosen.add(best_fid)
        tracker.add(best_fid)
        unhit = [s for s in unhit if best_fid not in s]
    return chosen


def _exact_hs(to_hit, blocked) -> set[int] | None:
    """Complete search: branch on the currently most constrained un-hit set."""
    tracker = _BlockTracker(blocked)
    chosen: set[int] = set()

    def dfs(unhit: list[frozenset[int]]) -> set[int] | None:
        if not unhit:
            return set(chosen)
        # fewest usable features first: fails fast and keeps branching narrow
        target_options: list[int] | None = None
        target_key = None
        for s in unhit:
            options = sorted(fid for fid in s if not tracker.forbidden(fid))
            key = (len(options), len(s), tuple(options))
            if target_key is None or key < target_key:
                target_key = key
                target_options = options
                if not options:
                    return None
        for fid in target_options:
            chosen.add(fid)
            tracker.add(fid)
            found = dfs([s for s in unhit if fid not in s])
            if found is not None:
                return found
            tracker.remove(fid)
            chosen.discard(fid)
        return None

    return dfs(list(to_hit))


# --- single-explanation extraction ---------------------------------------------


def _scan_order(seed: Iterable[int], order: Sequence[int] | None) -> list[int]:
    seed = set(seed)
    if order is None:
        return sorted(seed)
    if sorted(order) != list(range(len(order))):
        raise ContractError("scan order must be a permutation of all feature ids")
    return [fid for fid in order if fid in seed]


def extract_axp(
    model: Model,
    v: Instance,
    c: int,
    seed: Iterable[int],
    order: Sequence[int] | None = None,
    _clock: _Clock | None = None,
    _verify_seed: bool = True,
) -> frozenset[int]:
    """Deletion-based shrink of a sufficient ``seed`` to a subset-minimal AXp.

    Features are scanned in ascending id order (or the explicit ``order``);
    each is dropped iff the remainder still forces the prediction.
    """
    current = set(seed)
    if _verify_seed and not _sufficient(model, v, c, current, _clock):
        raise ContractError("seed set does not force the prediction")
    for fid in _scan_order(set(current), order):
        trial = current - {fid}
        if _sufficient(model, v, c, trial, _clock):
            current = trial
    return frozenset(current)


def extract_cxp(
    model: Model,
    v: Instance,
    c: int,
    seed: Iterable[int],
    order: Sequence[int] | None = None,
    _clock: _Clock | None = None,
    _verify_seed: bool = True,
) -> frozenset[int]:
    """Deletion-based shrink of a class-changing free ``seed`` to a CXp."""
    current = set(seed)
    if _verify_seed and not _admits_flip(model, v, c, current, _clock):
        raise ContractError("freeing the seed set admits no class change")
    for fid in _scan_order(set(current), order):
        trial = current - {fid}
        if _admits_flip(model, v, c, trial, _clock):
            current = trial
    return frozenset(current)


def _admits_flip(model, v, c, free: set[int], clock: _Clock | None) -> Instance | None:
    if clock is not None:
        clock.before_call()
    return _find_counterexample_unchecked(model, v, c, frozenset(free))


def _sufficient(model, v, c, subset: set[int], clock: _Clock | None) -> bool:
    free = set(range(model.space.m)) - subset
    return _admits_flip(model, v, c, free, clock) is None


# --- the enumeration loop -------------------------------------------------------


def enumerate_explanations(
    model: Model,
    v: Instance,
    c: int | None = None,
    budget: Budget | None = None,
    mode: str = "cxp-first",
    order: Sequence[int] | None = None,
) -> EnumerationReport:
    """Collect AXp's and CXp's until complete or until the budget trips.

    ``mode`` picks the candidate type: "cxp-first" (default) draws candidates
    as hitting sets of the collected AXp's and tests them as CXp's, amassing
    AXp's from failed candidates' complements; "axp-first" swaps the roles.
    A candidate that passes its test is minimal by construction: any proper
    subset of a minimal hitting set misses some collected dual, which refutes
    the respective condition outright.
    """
    if mode not in ("cxp-first", "axp-first"):
        raise ContractError(f"unknown mode {mode!r}")
    predicted = evaluate(model, v).class_id
    if c is None:
        c = predicted
    elif c != predicted:
        raise ContractError(f"instance is predicted class {predicted}, not {c}")
    budget = budget or Budget.unlimited()
    clock = _Clock(budget)
    m = model.space.m
    all_features = frozenset(range(m))

    axps: list[Explanation] = []
    cxps: list[Explanation] = []
    complete = False
    index = 0

    def record(kind: str, features: frozenset[int]) -> None:
        nonlocal index
        entry = Explanation(
            kind=kind,
            features=features,
            instance=v,
            class_id=c,
            discovery_index=index,
            discovery_time=clock.elapsed(),
            oracle_calls=clock.calls,
        )
        (axps if kind == AXP else cxps).append(entry)
        index += 1

    try:
        while True:
            if budget.max_axps is not None and len(axps) >= budget.max_axps:
                break
            if budget.max_cxps is not None and len(cxps) >= budget.max_cxps:
                break
            if mode == "cxp-first":
                candidate = minimal_hs([e.features for e in axps], [e.features for e in cxps], m)
                if candidate is None:
                    complete = True
                    break
                witness = _admits_flip(model, v, c, set(candidate), clock)
                if witness is not None:
                    record(CXP, candidate)
                else:
                    # The complement is sufficient, so it contains a new AXp.
                    record(AXP, extract_axp(
                        model, v, c, all_features - candidate, order,
                        _clock=clock, _verify_seed=False,
                    ))
            else:
                candidate = minimal_hs([e.features for e in cxps], [e.features for e in axps], m)
                if candidate is None:
                    complete = True
                    break
                if _sufficient(model, v, c, set(candidate), clock):
                    record(AXP, candidate)
                else:
                    record(CXP, extract_cxp(
                        model, v, c, all_features - candidate, order,
                        _clock=clock, _verify_seed=False,
                    ))
    except BudgetExceeded:
        complete = False

    return EnumerationReport(
        instance=v,
        class_id=c,
        mode=mode,
        complete=complete,
        axps=tuple(axps),
        cxps=tuple(cxps),
        oracle_calls=clock.calls,
        wall_time=clock.elapsed(),
        budget=budget,
    )


# --- independent exhaustive oracle and the duality check ------------------------


def brute_force_all_xps(
    model: TreeEnsemble, v: Instance, c: int
) -> tuple[list[frozenset[int]], list[frozenset[int]]]:
    """All AXp's and CXp's by subset scan over the exhaustive cell grid.

    Scans subsets in increasing cardinality with supersets of found sets
    pruned, so everything reported is subset-minimal. Feasible for m <= 20
    and grids up to 10^7 cells.
    """
    from itertools import combinations

    m = model.space.m
    if m > 20:
        raise CapacityError(f"2^{m} subsets exceed the brute-force cap (m <= 20)", size=2**m)
    oracle = _tree_oracle(model)
    cells = oracle.cells
    size = grid_size(cells, range(m))
    if size > GRID_CAP:
        raise CapacityError(f"cell grid has {size} points (cap {GRID_CAP})", size=size)
    if evaluate(model, v).class_id != c:
        raise ContractError("instance is not predicted as class c")
    classes = class_grid(cells, {})
    v_cells = cells.instance_cells(v)
    flip = classes != c

    def admits_flip(free: tuple[int, ...]) -> bool:
        free_set = set(free)
        ix = tuple(slice(None) if fid in free_set else v_cells[fid] for fid in range(m))
        return bool(flip[ix].any())

    axps: list[frozenset[int]] = []
    cxps: list[frozenset[int]] = []
    for size_ in range(m + 1):
        for combo in combinations(range(m), size_):
            s = frozenset(combo)
            if not any(found <= s for found in axps):
                others = tuple(fid for fid in range(m) if fid not in s)
                if not admits_flip(others):
                    axps.append(s)
            if not any(found <= s for found in cxps):
                if admits_flip(combo):
                    cxps.append(s)
    return axps, cxps


@dataclass(frozen=True)
class DualityViolation:
    side: str  # "axp" | "cxp"
    offender: frozenset[int]
    counterpart: frozenset[int] | None
    reason: str  # "misses" | "not-minimal"


def check_duality(
    axps: Iterable[frozenset[int]], cxps: Iterable[frozenset[int]]
) -> DualityViolation | None:
    """Verify each side is exactly the minimal hitting sets of the other.

    Intended for complete reports; returns the first violation found, or None.
    """
    axps = [frozenset(s) for s in axps]
    cxps = [frozenset(s) for s in cxps]

    def first_violation(side: str, sets, duals) -> DualityViolation | None:
        for s in sets:
            for d in duals:
                if not s & d:
                    return DualityViolation(side, s, d, "misses")
            for fid in sorted(s):
                shrunk = s - {fid}
                if all(shrunk & d for d in duals):
                    return DualityViolation(side, s, None, "not-minimal")
        return None

    return first_violation("axp", axps, cxps) or first_violation("cxp", cxps, axps)
