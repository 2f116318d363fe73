"""Two hospitals hold different Asia attributes for the same 10,000 patients.

Each trains its own network on its columns plus the shared label; the
ensemble averages their posteriors through a masked secure sum. We compare
against the single model a trusted party could build from the pooled table.
"""
import numpy as np

from fbne import LearningConfig, SplitPlan, builtin_asia, cross_validate, forward_sample, train_fbne
from fbne.federation import make_parties
from fbne.harness import inspect_model
from fbne.bif import save_bif

data = forward_sample(builtin_asia(), 10000, seed=2024)
plan = SplitPlan("vertical", n_parties=2, seed=1)

parties = make_parties(data, plan, "lung")
for p in parties:
    print(f"party {p.party_id} holds {', '.join(p.attributes)}")

for rec in cross_validate(data, "lung", plan, LearningConfig(), seed=0):
    print(f"{rec.model:>22}  AUC {rec.auc:.4f}  (fold spread {np.std(rec.fold_aucs):.4f})")

# The members are ordinary networks; writing them out lets each party
# compare structures without sharing data.
ensemble = train_fbne(data, parties)
for m in ensemble.members:
    path = f"party-{m.party_id}.bif"
    save_bif(m.model.network, path)
    print(inspect_model(path))
