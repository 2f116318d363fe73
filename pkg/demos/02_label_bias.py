"""Horizontal split where patients with dyspnoea cluster at party 1.

Bias moves positives between parties, yet with 10,000 rows both parties
still see enough of each label to estimate the same conditionals, so the
AUC columns barely move. At n=400 and bias 0.95 party 2 drops to about
chance while the ensemble holds.
"""
from fbne import LearningConfig, SplitPlan, builtin_asia, cross_validate, forward_sample
from fbne.federation import make_parties

data = forward_sample(builtin_asia(), 10000, seed=2024)
dysp = data.column_index("dysp")

for bias in (0.5, 0.75, 0.85, 0.95):
    plan = SplitPlan("horizontal", n_parties=2, bias=bias, seed=3)
    parties = make_parties(data, plan, "dysp")
    share = [float((data.data[p.rows, dysp] == 0).mean()) for p in parties]
    records = cross_validate(data, "dysp", plan, LearningConfig(), seed=0)
    aucs = "  ".join(f"{r.model} {r.auc:.4f}" for r in records)
    print(f"bias {bias:.2f}  positives per party {share[0]:.3f}/{share[1]:.3f}  {aucs}")
