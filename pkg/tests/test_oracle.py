import random

import pytest

from conftest import linear_corner_flip, naive_class
from ffax.cells import CellSystem
from ffax.errors import CapabilityError, CapacityError, ContractError
from ffax.model import (
    BooleanSplit,
    FeatureSpace,
    FeatureSpec,
    Instance,
    Leaf,
    Tree,
    TreeEnsemble,
    evaluate,
)
from ffax.oracle import (
    PartialAssignment,
    ScoreBounds,
    brute_force_decide,
    decide_sufficiency,
    decide_sufficiency_linear,
    find_counterexample,
    score_bounds,
)
from ffax.synth import random_ensemble, random_instance, random_linear, random_space


def conjunction_model():
    """Class 1 iff both boolean features hold."""
    space = FeatureSpace((FeatureSpec(0, "a", "boolean"), FeatureSpec(1, "b", "boolean")))
    root = BooleanSplit(0, yes=BooleanSplit(1, yes=Leaf(1.0), no=Leaf(-1.0)), no=Leaf(-1.0))
    return TreeEnsemble(space, ("f", "t"), (Tree(1, root),))


# --- cell system sanity -------------------------------------------------------


def test_cell_representatives_are_equivalent_to_their_points(rng):
    # kappa is constant per cell: any point scores like its cell representative
    for _ in range(25):
        space = random_space(rng, rng.randint(2, 5))
        model = random_ensemble(rng, space, n_trees=rng.randint(1, 6), depth=3)
        cells = CellSystem(model)
        for _ in range(20):
            point = random_instance(rng, space)
            rep = Instance(values=cells.cell_point(cells.instance_cells(point)))
            assert evaluate(model, point).scores == evaluate(model, rep).scores


def test_cell_representatives_lie_in_their_cells(adult_model):
    cells = CellSystem(adult_model)
    fid = 5  # Hours/w with thresholds at 40 and 45
    assert cells.boundaries[fid] == (40.0, 45.0)
    reps = cells.reps[fid]
    assert len(reps) == 3
    assert 0.0 <= reps[0] <= 40.0 < reps[1] <= 45.0 < reps[2] <= 99.0
    assert cells.cell_of(fid, 40.0) == 0
    assert cells.cell_of(fid, 40.0000001) == 1
    assert cells.cell_of(fid, 45.0) == 1
    assert cells.cell_of(fid, 99.0) == 2


# --- decide_sufficiency -------------------------------------------------------


def test_education_and_hours_suffice(adult_model, adult_instance):
    result = decide_sufficiency(adult_model, adult_instance, 0, {0, 5})
    assert result.sufficient and result.witness is None
    bounds = score_bounds(
        adult_model, PartialAssignment(instance=adult_instance, fixed=frozenset({0, 5}))
    )
    assert bounds.hi == pytest.approx(0.0770 - 0.0200 - 0.0580, abs=1e-12)
    assert bounds.hi == pytest.approx(-0.0010, abs=1e-9)


def test_everything_fixed_is_sufficient(adult_model, adult_instance):
    result = decide_sufficiency(adult_model, adult_instance, 0, set(range(6)))
    assert result.sufficient


def test_education_alone_insufficient_with_sound_witness(adult_model, adult_instance):
    result = decide_sufficiency(adult_model, adult_instance, 0, {0})
    assert not result.sufficient
    w = result.witness
    assert w.values[0] == adult_instance.values[0]  # agrees on the fixed feature
    pred = evaluate(adult_model, w)
    assert pred.class_id == 1 and pred.scores[1] >= 0.0


def test_predicted_class_precondition(adult_model, adult_instance):
    with pytest.raises(ContractError, match="predicted class"):
        decide_sufficiency(adult_model, adult_instance, 1, {0, 5})


# --- find_counterexample ------------------------------------------------------


def test_no_free_features_means_no_counterexample(adult_model, adult_instance):
    assert find_counterexample(adult_model, adult_instance, 0, set()) is None


def test_freeing_education_flips_via_doctorate(adult_model, adult_instance):
    w = find_counterexample(adult_model, adult_instance, 0, {0})
    assert w is not None
    assert w.values[1:] == adult_instance.values[1:]  # only Education moved
    assert w.values[0] == "Doctorate"
    assert evaluate(adult_model, w).scores[1] == pytest.approx(
        -0.1089 - 0.2404 + 0.3890, abs=1e-12
    )


def test_conjunction_counterexample():
    model = conjunction_model()
    v = Instance((True, True))
    w = find_counterexample(model, v, 1, {0})
    assert w is not None
    assert (bool(w.values[0]), bool(w.values[1])) == (False, True)


# --- score_bounds -------------------------------------------------------------


def test_bounds_all_free_match_exhaustive_enumeration(adult_model, adult_instance):
    from itertools import product

    cells = CellSystem(adult_model)
    pa = PartialAssignment(instance=adult_instance, fixed=frozenset())
    bounds = score_bounds(adult_model, pa)
    scores = []
    for combo in product(*(range(n) for n in cells.sizes)):
        point = Instance(values=cells.cell_point(combo))
        scores.append(evaluate(adult_model, point).scores[1])
    assert bounds.hi == max(scores)
    assert bounds.lo == min(scores)


def test_bounds_all_fixed_equals_prediction(adult_model, adult_instance):
    pa = PartialAssignment(instance=adult_instance, fixed=frozenset(range(6)))
    bounds = score_bounds(adult_model, pa)
    assert bounds.lo == bounds.hi == pytest.approx(-0.4073, abs=1e-12)


def test_bounds_single_boolean_split():
    space = FeatureSpace((FeatureSpec(0, "a", "boolean"),))
    model = TreeEnsemble(
        space, ("n", "y"), (Tree(1, BooleanSplit(0, yes=Leaf(0.7), no=Leaf(-0.2))),)
    )
    pa = PartialAssignment(instance=Instance((True,)), fixed=frozenset())
    assert score_bounds(model, pa) == ScoreBounds(lo=-0.2, hi=0.7)


def test_bounds_multiclass_pairwise(rng):
    space = random_space(rng, 4)
    model = random_ensemble(rng, space, n_trees=6, depth=2, k=3)
    v = random_instance(rng, space)
    cells = CellSystem(model)
    from itertools import product

    pa = PartialAssignment(instance=v, fixed=frozenset({0}))
    fixed_cell = cells.cell_of(0, v.values[0])
    for plus, minus in ((1, 0), (2, 1)):
        bounds = score_bounds(model, pa, pair=(plus, minus))
        diffs = []
        for combo in product(*(range(n) for n in cells.sizes)):
            if combo[0] != fixed_cell:
                continue
            values = list(cells.cell_point(combo))
            values[0] = v.values[0]
            s = evaluate(model, Instance(tuple(values))).scores
            diffs.append(s[plus] - s[minus])
        assert bounds.hi == max(diffs)
        assert bounds.lo == min(diffs)


# --- brute force and agreement fuzz ---------------------------------------------


def test_brute_force_trivial_cases(adult_model, adult_instance):
    assert brute_force_decide(adult_model, adult_instance, 0, set(range(6))).sufficient
    model = conjunction_model()
    v = Instance((True, True))
    result = brute_force_decide(model, v, 1, {0})
    assert not result.sufficient


def test_brute_force_capacity_error(rng):
    space = random_space(rng, 30, kinds=("boolean",))
    model = random_ensemble(rng, space, n_trees=1, depth=1)
    v = random_instance(rng, space)
    c = evaluate(model, v).class_id
    with pytest.raises(CapacityError) as err:
        brute_force_decide(model, v, c, set())
    assert err.value.size == 2**30


def test_brute_force_rejects_linear_models(rng):
    model, _ = random_linear(rng, 3)
    v = Instance((0.5, 0.5, 0.5))
    with pytest.raises(CapabilityError):
        brute_force_decide(model, v, evaluate(model, v).class_id, set())


def test_decide_agrees_with_brute_force_on_fixture(adult_model, adult_instance):
    from itertools import combinations

    for size in range(7):
        for subset in combinations(range(6), size):
            fast = decide_sufficiency(adult_model, adult_instance, 0, set(subset))
            slow = brute_force_decide(adult_model, adult_instance, 0, set(subset))
            assert fast.sufficient == slow.sufficient, subset


def test_decide_agrees_with_brute_force_fuzz(rng):
    for trial in range(60):
        m = rng.randint(2, 8)
        space = random_space(rng, m)
        model = random_ensemble(
            rng, space, n_trees=rng.randint(1, 6), depth=rng.randint(1, 3),
            k=rng.choice((2, 2, 3)),
        )
        v = random_instance(rng, space)
        c = evaluate(model, v).class_id
        for _ in range(6):
            subset = {fid for fid in range(m) if rng.random() < 0.5}
            fast = decide_sufficiency(model, v, c, subset)
            slow = brute_force_decide(model, v, c, subset)
            assert fast.sufficient == slow.sufficient
            if not fast.sufficient:
                w = fast.witness
                assert all(w.values[f] == v.values[f] for f in subset)
                assert naive_class(model, w.values) != c


def test_sufficiency_is_monotone(rng):
    for _ in range(30):
        m = rng.randint(2, 7)
        space = random_space(rng, m)
        model = random_ensemble(rng, space, n_trees=rng.randint(1, 5), depth=2)
        v = random_instance(rng, space)
        c = evaluate(model, v).class_id
        small = {fid for fid in range(m) if rng.random() < 0.4}
        grow = small | {fid for fid in range(m) if rng.random() < 0.5}
        if decide_sufficiency(model, v, c, small).sufficient:
            assert decide_sufficiency(model, v, c, grow).sufficient


# --- linear oracle ---------------------------------------------------------------


def linear_unit_square():
    space = FeatureSpace((
        FeatureSpec(0, "x0", "ordinal", lo=0.0, hi=1.0),
        FeatureSpec(1, "x1", "ordinal", lo=0.0, hi=1.0),
    ))
    from ffax.model import LinearModel

    return LinearModel(space=space, weights=(1.0, 1.0), bias=-1.5)


def test_linear_worst_case_endpoint():
    model = linear_unit_square()
    v = Instance((1.0, 1.0))
    assert evaluate(model, v).class_id == 1
    result = decide_sufficiency_linear(model, v, 1, {0})
    assert not result.sufficient
    assert result.witness.values == (1.0, 0.0)
    assert evaluate(model, result.witness).class_id == 0


def test_linear_fully_fixed_sufficient():
    model = linear_unit_square()
    v = Instance((1.0, 1.0))
    assert decide_sufficiency_linear(model, v, 1, {0, 1}).sufficient


def test_linear_agrees_with_corner_enumeration(rng):
    for _ in range(120):
        model, space = random_linear(rng, rng.randint(1, 8))
        v = random_instance(rng, space)
        c = evaluate(model, v).class_id
        fixed = {fid for fid in range(space.m) if rng.random() < 0.5}
        result = decide_sufficiency_linear(model, v, c, fixed)
        assert result.sufficient == (not linear_corner_flip(model, v, c, fixed))
        if not result.sufficient:
            w = result.witness
            assert all(w.values[f] == v.values[f] for f in fixed)
            assert evaluate(model, w).class_id != c


def test_generic_ops_dispatch_to_linear():
    model = linear_unit_square()
    v = Instance((1.0, 1.0))
    assert not decide_sufficiency(model, v, 1, {0}).sufficient
    assert find_counterexample(model, v, 1, {1}) is not None


def test_unsupported_model_kind():
    with pytest.raises(CapabilityError):
        find_counterexample(object(), Instance((1,)), 0, set())
