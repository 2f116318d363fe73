"""Iris with randomly blanked cells.

Continuous measurements are discretized into bins holding at least 10% of
the training rows; EM fills in the blanks while fitting each network.
"""
from fbne import LearningConfig, SplitPlan, cross_validate, inject_missing, load_csv
from fbne.harness import fixtures_dir

iris = load_csv(fixtures_dir() / "iris.csv", categorical=["species"])
plan = SplitPlan("vertical", n_parties=2, seed=0)

for level in (0.0, 0.05, 0.1, 0.3):
    data = inject_missing(iris, level, seed=7, exempt=["species"])
    records = cross_validate(data, "species", plan, LearningConfig(), seed=1)
    print(f"missing {level:.2f}: " + "  ".join(f"{r.model} {r.auc:.3f}" for r in records))
