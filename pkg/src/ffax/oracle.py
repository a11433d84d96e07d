"""Exact sufficiency/counterexample decisions over the full feature space.

The tree-ensemble engine is a best-bound-first branch and bound over boxes of
threshold-cell sub-domains. The relaxation bound is the per-tree sum of the
extreme reachable leaf under the current box, accumulated per class in
tree-index order and subtracted last; IEEE addition and subtraction are
monotone in each argument, so the bound dominates the exactly-evaluated score
of every completion with no epsilon anywhere. A box with no ambiguous split
has a single reachable leaf per tree, hence an exact value; popped best-first,
the first such box is a global optimum.

Branching picks the free feature with the largest total bound gap (sum of
hi-lo over trees whose path is ambiguous because of it) and splits its current
sub-domain at the first ambiguous test on that feature, in tree order.

Class change is decided per the model's tie rule: for a single-score binary
model with prediction 1 the query is min score < 0, with prediction 0 it is
max score >= 0; for multiclass it is a disjunction over rival classes c' of
max(score_c' - score_c) reaching 0, strictly when c' > c.

``brute_force_decide`` answers the same questions by enumerating the cell grid
(exact because the score is constant per cell); it shares only the cell
partition with the branch and bound and serves as its independent check.
"""

import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cells import GRID_CAP, CellSystem, class_grid, grid_size
from .errors import CapabilityError, CapacityError, ContractError
from .model import (
    BOOLEAN,
    Instance,
    LinearModel,
    Model,
    TreeEnsemble,
    evaluate,
)


@dataclass(frozen=True)
class PartialAssignment:
    """Features in ``fixed`` are pinned to the instance's values; the rest
    range over their full declared domains (sub-domains during search are
    engine-internal)."""

    instance: Instance
    fixed: frozenset[int]

    def free(self, m: int) -> frozenset[int]:
        return frozenset(range(m)) - self.fixed


@dataclass(frozen=True)
class ScoreBounds:
    """Attained extrema of a class-score expression over all completions."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ContractError(f"bounds crossed: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class SufficiencyResult:
    sufficient: bool
    witness: Instance | None = None


class _Objective:
    """Maximize (base+sum of pos-class trees) - (base+sum of neg-class trees)."""

    __slots__ = ("pos", "neg", "pos_trees", "neg_trees", "pos_base", "neg_base")

    def __init__(self, cells: CellSystem, pos: int | None, neg: int | None):
        model = cells.model
        self.pos, self.neg = pos, neg
        self.pos_trees = tuple(r for cid, r in cells.trees if cid == pos)
        self.neg_trees = tuple(r for cid, r in cells.trees if cid == neg)
        self.pos_base = model.base_score[pos] if pos is not None else 0.0
        self.neg_base = model.base_score[neg] if neg is not None else 0.0


def _tree_range(node, box):
    """(min leaf, max leaf, ambiguous feature -> seen) reachable under box."""
    tag = node[0]
    if tag == "leaf":
        return node[1], node[1], None
    if tag == "ord":
        _, fid, p, yes, no = node
        a, b = box[fid]
        if b <= p:
            return _tree_range(yes, box)
        if a > p:
            return _tree_range(no, box)
    else:
        _, fid, idx, yes, no = node
        allowed = box[fid]
        if allowed <= idx:
            return _tree_range(yes, box)
        if allowed.isdisjoint(idx):
            return _tree_range(no, box)
    lo_y, hi_y, amb_y = _tree_range(yes, box)
    lo_n, hi_n, amb_n = _tree_range(no, box)
    amb = {fid}
    if amb_y:
        amb |= amb_y
    if amb_n:
        amb |= amb_n
    return min(lo_y, lo_n), max(hi_y, hi_n), amb


def _analyze(obj: _Objective, box):
    """Upper bound of the objective over the box, plus branching info.

    Accumulation order matters: per-class extreme sums are built in tree-index
    order, then subtracted, mirroring evaluate's exact float semantics.
    """
    gaps: dict[int, float] = {}
    pos_acc = obj.pos_base
    for root in obj.pos_trees:
        lo, hi, amb = _tree_range(root, box)
        pos_acc = pos_acc + hi
        if amb:
            for fid in amb:
                gaps[fid] = gaps.get(fid, 0.0) + (hi - lo)
    neg_acc = obj.neg_base
    for root in obj.neg_trees:
        lo, hi, amb = _tree_range(root, box)
        neg_acc = neg_acc + lo
        if amb:
            for fid in amb:
                gaps[fid] = gaps.get(fid, 0.0) + (hi - lo)
    bound = pos_acc - neg_acc if obj.neg is not None else pos_acc
    return bound, gaps


def _first_ambiguous_test(obj: _Objective, box, fid: int):
    """First reachable ambiguous test on ``fid`` in tree order, preorder."""
    for root in obj.pos_trees + obj.neg_trees:
        stack = [root]
        while stack:
            node = stack.pop()
            tag = node[0]
            if tag == "leaf":
                continue
            if tag == "ord":
                _, nfid, p, yes, no = node
                a, b = box[nfid]
                yes_ok, no_ok = a <= p, b > p
                if nfid == fid and yes_ok and no_ok:
                    return ("ord", p)
            else:
                _, nfid, idx, yes, no = node
                allowed = box[nfid]
                inter = allowed & idx
                yes_ok, no_ok = bool(inter), not allowed <= idx
                if nfid == fid and yes_ok and no_ok:
                    return ("set", idx)
            if no_ok:
                stack.append(no)
            if yes_ok:
                stack.append(yes)
    raise AssertionError("no ambiguous test found for branch feature")


def _split_box(box, fid: int, test):
    if test[0] == "ord":
        a, b = box[fid]
        p = test[1]
        lo_box = list(box)
        hi_box = list(box)
        lo_box[fid] = (a, p)
        hi_box[fid] = (p + 1, b)
        return tuple(lo_box), tuple(hi_box)
    allowed = box[fid]
    inside = allowed & test[1]
    outside = allowed - test[1]
    in_box = list(box)
    out_box = list(box)
    in_box[fid] = inside
    out_box[fid] = outside
    return tuple(in_box), tuple(out_box)


def _maximize(obj: _Objective, box, fail_below: float | None = None, strict: bool = False):
    """Exact max of the objective and an optimal box.

    With ``fail_below`` set, stop early and return (None, None) as soon as the
    best remaining bound shows the target (>= fail_below, or > with strict)
    is unreachable; return the first witness box otherwise.
    """
    bound, gaps = _analyze(obj, box)
    heap = [(-bound, 0, box, gaps)]
    seq = 1
    while heap:
        nbound, _, cur, gaps = heapq.heappop(heap)
        bound = -nbound
        if fail_below is not None and (bound < fail_below or (strict and bound <= fail_below)):
            return None, None
        if not gaps:
            return bound, cur
        fid = max(gaps, key=lambda f: (gaps[f], -f))
        children = _split_box(cur, fid, _first_ambiguous_test(obj, cur, fid))
        for child in children:
            cbound, cgaps = _analyze(obj, child)
            heapq.heappush(heap, (-cbound, seq, child, cgaps))
            seq += 1
    raise AssertionError("search exhausted without a determined box")


# --- public box construction -------------------------------------------------


def _full_box(cells: CellSystem, fixed_cells: dict[int, int]):
    box = []
    for fid, size in enumerate(cells.sizes):
        if fid in fixed_cells:
            i = fixed_cells[fid]
            box.append((i, i) if cells.kinds[fid] == "ordinal" else frozenset((i,)))
        else:
            box.append((0, size - 1) if cells.kinds[fid] == "ordinal" else frozenset(range(size)))
    return tuple(box)


def _witness_from_box(cells: CellSystem, box, v: Instance, fixed) -> Instance:
    indices = []
    for fid, dom in enumerate(box):
        indices.append(dom[0] if isinstance(dom, tuple) else min(dom))
    return cells.materialize(indices, v, fixed)


class _TreeOracle:
    """Per-model reusable state: cell system plus compiled objectives."""

    def __init__(self, model: TreeEnsemble):
        self.model = model
        self.cells = CellSystem(model)
        self._objectives: dict[tuple, _Objective] = {}

    def objective(self, pos: int | None, neg: int | None) -> _Objective:
        key = (pos, neg)
        if key not in self._objectives:
            self._objectives[key] = _Objective(self.cells, pos, neg)
        return self._objectives[key]

    def box_for(self, v: Instance, fixed) -> tuple:
        fixed_cells = {fid: self.cells.cell_of(fid, v.values[fid]) for fid in fixed}
        return _full_box(self.cells, fixed_cells)

    def find_class_change(self, v: Instance, c: int, free) -> Instance | None:
        """A domain-valid x agreeing with v outside ``free`` with class != c."""
        fixed = frozenset(range(self.model.space.m)) - frozenset(free)
        box = self.box_for(v, fixed)
        if self.model.single_score:
            if c == 1:  # flip needs score < 0, i.e. max(-score) > 0
                _, wbox = _maximize(self.objective(None, 1), box, fail_below=0.0, strict=True)
            else:  # flip needs score >= 0
                _, wbox = _maximize(self.objective(1, None), box, fail_below=0.0, strict=False)
            if wbox is None:
                return None
            return self.cells.materialize(_box_indices(wbox), v, fixed)
        for rival in range(self.model.k):
            if rival == c:
                continue
            strict = rival > c  # ties go to the lower class id
            _, wbox = _maximize(
                self.objective(rival, c), box, fail_below=0.0, strict=strict
            )
            if wbox is not None:
                return self.cells.materialize(_box_indices(wbox), v, fixed)
        return None

    def score_bounds(self, box, pair: tuple[int, int] | None) -> ScoreBounds:
        if pair is None:
            if not self.model.single_score:
                raise ContractError(
                    "multiclass ensembles need an explicit (rival, predicted) pair"
                )
            hi, _ = _maximize(self.objective(1, None), box)
            neg_hi, _ = _maximize(self.objective(None, 1), box)
            return ScoreBounds(lo=-neg_hi, hi=hi)
        plus, minus = pair
        hi, _ = _maximize(self.objective(plus, minus), box)
        neg_hi, _ = _maximize(self.objective(minus, plus), box)
        return ScoreBounds(lo=-neg_hi, hi=hi)


def _box_indices(box) -> list[int]:
    return [dom[0] if isinstance(dom, tuple) else min(dom) for dom in box]


_ORACLE_CACHE: dict[int, _TreeOracle] = {}


def _tree_oracle(model: TreeEnsemble) -> _TreeOracle:
    oracle = _ORACLE_CACHE.get(id(model))
    if oracle is None or oracle.model is not model:
        oracle = _TreeOracle(model)
        _ORACLE_CACHE.clear()  # keep at most one compiled model around
        _ORACLE_CACHE[id(model)] = oracle
    return oracle


# --- linear models ------------------------------------------------------------


def _linear_extreme(model: LinearModel, v: Instance, fixed, want_max: bool) -> tuple[float, list]:
    """Extreme score over completions, with the achieving point's values.

    Ascending-id accumulation reproduces LinearModel.score exactly, so the
    returned float equals evaluate() at the returned point.
    """
    values = []
    s = model.bias
    for fid, spec in enumerate(model.space.features):
        w = model.weights[fid]
        if fid in fixed:
            x = v.values[fid]
            xnum = (1.0 if x else 0.0) if spec.kind == BOOLEAN else float(x)
            values.append(x)
            s += w * xnum
            continue
        lo, hi = (0.0, 1.0) if spec.kind == BOOLEAN else (spec.lo, spec.hi)
        lo_c, hi_c = w * lo, w * hi
        pick_hi = hi_c > lo_c if want_max else hi_c < lo_c
        x = hi if pick_hi else lo
        values.append(bool(x) if spec.kind == BOOLEAN else x)
        s += w * float(x)
    return s, values


def decide_sufficiency_linear(
    model: LinearModel, v: Instance, c: int, subset: Iterable[int]
) -> SufficiencyResult:
    """Closed-form decision: each free feature takes its adversarial endpoint."""
    if not isinstance(model, LinearModel):
        raise CapabilityError("decide_sufficiency_linear needs a LinearModel")
    fixed = frozenset(subset)
    _check_predicted(model, v, c)
    if c == 1:
        worst, point = _linear_extreme(model, v, fixed, want_max=False)
        if worst >= 0.0:
            return SufficiencyResult(sufficient=True)
    else:
        worst, point = _linear_extreme(model, v, fixed, want_max=True)
        if worst < 0.0:
            return SufficiencyResult(sufficient=True)
    return SufficiencyResult(sufficient=False, witness=Instance(values=tuple(point)))


# --- public operations ---------------------------------------------------------


def _check_predicted(model: Model, v: Instance, c: int) -> None:
    if not isinstance(model, (TreeEnsemble, LinearModel)):
        raise CapabilityError(f"unsupported model kind {type(model).__name__}")
    actual = evaluate(model, v).class_id
    if actual != c:
        raise ContractError(f"instance is predicted class {actual}, not {c}")


def find_counterexample(
    model: Model, v: Instance, c: int, free: Iterable[int]
) -> Instance | None:
    """Witness x agreeing with v outside ``free`` with a different class, or None."""
    _check_predicted(model, v, c)
    return _find_counterexample_unchecked(model, v, c, frozenset(free))


def _find_counterexample_unchecked(
    model: Model, v: Instance, c: int, free: frozenset[int]
) -> Instance | None:
    if isinstance(model, TreeEnsemble):
        return _tree_oracle(model).find_class_change(v, c, free)
    if isinstance(model, LinearModel):
        fixed = model.space.all_features() - free
        result = decide_sufficiency_linear(model, v, c, fixed)
        return result.witness
    raise CapabilityError(f"unsupported model kind {type(model).__name__}")


def decide_sufficiency(
    model: Model, v: Instance, c: int, subset: Iterable[int]
) -> SufficiencyResult:
    """Does fixing ``subset`` to v's values force class c over the whole space?"""
    _check_predicted(model, v, c)
    free = model.space.all_features() - frozenset(subset)
    witness = _find_counterexample_unchecked(model, v, c, free)
    if witness is None:
        return SufficiencyResult(sufficient=True)
    return SufficiencyResult(sufficient=False, witness=witness)


def score_bounds(
    model: TreeEnsemble, pa: PartialAssignment, pair: tuple[int, int] | None = None
) -> ScoreBounds:
    """Attained extrema of the score (or of s_plus - s_minus for ``pair``)."""
    if not isinstance(model, TreeEnsemble):
        raise CapabilityError("score_bounds is defined for tree ensembles")
    oracle = _tree_oracle(model)
    box = oracle.box_for(pa.instance, pa.fixed)
    return oracle.score_bounds(box, pair)


def brute_force_decide(
    model: TreeEnsemble, v: Instance, c: int, subset: Iterable[int]
) -> SufficiencyResult:
    """Decide sufficiency by enumerating the cell grid of the free features.

    Exact for tree ensembles (the score is constant per cell); refuses grids
    over 10^7 points and non-tree models.
    """
    if not isinstance(model, TreeEnsemble):
        raise CapabilityError("brute_force_decide enumerates tree-ensemble cells only")
    _check_predicted(model, v, c)
    oracle = _tree_oracle(model)
    cells = oracle.cells
    fixed = frozenset(subset)
    free = [fid for fid in range(model.space.m) if fid not in fixed]
    size = grid_size(cells, free)
    if size > GRID_CAP:
        raise CapacityError(f"free-feature grid has {size} points (cap {GRID_CAP})", size=size)
    fixed_cells = {fid: cells.cell_of(fid, v.values[fid]) for fid in fixed}
    classes = class_grid(cells, fixed_cells)
    bad = classes != c
    if not bad.any():
        return SufficiencyResult(sufficient=True)
    first = np.unravel_index(int(np.argmax(bad)), bad.shape)
    indices = [
        fixed_cells[fid] if fid in fixed_cells else int(first[fid])
        for fid in range(model.space.m)
    ]
    witness = cells.materialize(indices, v, fixed)
    return SufficiencyResult(sufficient=False, witness=witness)
