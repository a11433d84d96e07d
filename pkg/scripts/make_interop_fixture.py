#!/usr/bin/env python3
"""Regenerate the dump-interop fixture under fixtures/interop/.

Trains a 25-tree depth-3 gradient-boosted binary classifier on the public
breast-cancer tabular dataset bundled with scikit-learn, exports its trees to
the toolkit dump text format, and records the toolkit's own margins on 100
sampled rows. The committed fixture lets the test suite check parser/evaluator
agreement without retraining.

The dump's numeric tests use strict-less semantics (yes iff x < t); sklearn
splits are inclusive (left iff x <= t), so thresholds are written as
nextafter(t, +inf), which is float-exact in both directions.

Offline one-time script: needs scikit-learn, which is not a package
dependency. Run from the repository root:

    python scripts/make_interop_fixture.py
"""

import json
import math
import sys
from pathlib import Path

try:
    import numpy as np
    from sklearn.datasets import load_breast_cancer
    from sklearn.ensemble import GradientBoostingClassifier
except ImportError as exc:
    sys.exit(f"this offline script needs scikit-learn: {exc}")

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures" / "interop"

SEED = 20240901
N_TREES = 25
DEPTH = 3
N_POINTS = 100


def export_tree(tree, feature_names, learning_rate):
    """One sklearn regression tree as a nested toolkit dump node."""

    def node(i):
        left, right = tree.children_left[i], tree.children_right[i]
        if left == -1:
            return {"nodeid": int(i), "leaf": float(tree.value[i][0][0] * learning_rate)}
        return {
            "nodeid": int(i),
            "split": feature_names[tree.feature[i]],
            "split_condition": math.nextafter(float(tree.threshold[i]), math.inf),
            "yes": int(left),
            "no": int(right),
            "missing": int(left),
            "children": [node(left), node(right)],
        }

    return node(0)


def main() -> None:
    data = load_breast_cancer()
    names = [str(n) for n in data.feature_names]
    X, y = data.data, data.target

    clf = GradientBoostingClassifier(
        n_estimators=N_TREES, max_depth=DEPTH, init="zero", random_state=SEED
    )
    clf.fit(X, y)

    dump = [
        export_tree(stage[0].tree_, names, clf.learning_rate)
        for stage in clf.estimators_
    ]

    space = {
        "format": "feature-space/1",
        "features": [
            {
                "name": name,
                "kind": "ordinal",
                "lo": math.floor(X[:, i].min()) - 1.0,
                "hi": math.ceil(X[:, i].max()) + 1.0,
            }
            for i, name in enumerate(names)
        ],
    }

    rng = np.random.default_rng(SEED)
    rows = rng.choice(len(X), size=N_POINTS, replace=False)
    points = X[rows]
    margins = clf.decision_function(points)

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "model_dump.json").write_text(json.dumps(dump, indent=1))
    (OUT / "feature_space.json").write_text(json.dumps(space, indent=1))
    with open(OUT / "points.csv", "w") as handle:
        handle.write(",".join(names) + "\n")
        for row in points:
            handle.write(",".join(format(v, ".17g") for v in row) + "\n")
    with open(OUT / "expected_margins.csv", "w") as handle:
        handle.write("margin\n")
        for margin in margins:
            handle.write(format(margin, ".17g") + "\n")
    (OUT / "meta.json").write_text(
        json.dumps(
            {
                "toolkit": "scikit-learn GradientBoostingClassifier",
                "dataset": "breast_cancer (bundled public tabular set)",
                "n_trees": N_TREES,
                "max_depth": DEPTH,
                "init": "zero",
                "learning_rate": clf.learning_rate,
                "seed": SEED,
                "points": N_POINTS,
                "classes": ["malignant", "benign"],
                "note": "margins are the toolkit's decision_function on points.csv rows",
            },
            indent=1,
        )
    )
    print(f"wrote fixture for {N_TREES} trees, {len(names)} features, {N_POINTS} points")
    print(f"margin range: [{margins.min():.4f}, {margins.max():.4f}]")


if __name__ == "__main__":
    main()
