"""What the aggregator actually sees during one secure-sum round."""
import numpy as np

from fbne import SecureSumSession, secure_weighted_sum

votes = [np.array([0.9, 0.1]), np.array([0.3, 0.7]), np.array([0.6, 0.4])]
weights = [1.0, 1.0, 2.0]

session = SecureSumSession(n_parties=3, seed=5)
result = secure_weighted_sum(session, list(zip(votes, weights)))

for label, value in session.audit:
    print(f"{label:>8}: {value}")
print("weighted mean:", result)
print("plaintext    :", sum(w * v for w, v in zip(weights, votes)) / sum(weights))
