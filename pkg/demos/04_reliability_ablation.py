"""Comparing selection functions with the effective-reliability reward.

Builds a synthetic annotated VQA set with per-item first-token scores, then
scores each answer-or-abstain rule: rewarded when right, penalized (cost c)
when wrong, neutral when abstaining. Ends with the threshold-sensitivity
procedure: optimal threshold per subsampled dataset, 30 neighbors around
it, rewards normalized by the neighborhood best.
"""

import numpy as np

from asknav.reliability import (
    METHODS,
    ReliabilityItem,
    evaluate_method,
    find_tau_star,
    tau_sensitivity,
)

rng = np.random.default_rng(7)
VOCAB = ("Yes", "No", "IDK")

items, scores = [], []
for i in range(400):
    truth = str(rng.choice(VOCAB, p=(0.4, 0.4, 0.2)))
    annotations = tuple(truth if rng.random() < 0.85 else str(rng.choice(VOCAB)) for _ in range(3))
    score = {k: float(rng.normal(0.0, 1.0)) for k in VOCAB}
    score[truth] += float(rng.uniform(0.5, 4.0))  # mostly right, sometimes barely
    items.append(ReliabilityItem(image_ref=f"img://{i}", question=f"q{i}?", annotations=annotations))
    scores.append(score)

print(f"{len(items)} items; reward = acc if right, -1 if wrong, 0 if abstaining\n")
print(f"{'method':>8} {'tau*':>9} {'phi@tau*':>9} {'phi@fixed':>10}")
for name, fixed_tau in (("maxprob", 0.5), ("entropy", 0.75), ("energy", -1.0)):
    method = METHODS[name]
    tau_star, phi_star = find_tau_star(items, scores, method)
    at_fixed = evaluate_method(items, scores, method, fixed_tau).phi
    print(f"{name:>8} {tau_star:>9.3f} {phi_star:>9.2f} {at_fixed:>10.2f}")

print("\nthreshold sensitivity (11 subsampled datasets, 30 neighbors each):")
for name in ("entropy", "energy"):
    results = tau_sensitivity(items, scores, METHODS[name])
    pooled = np.array([v for r in results for v in r.normalized_phis])
    q1, q3 = np.percentile(pooled, (25, 75))
    print(
        f"  {name:>8}: median {np.median(pooled):.3f}, IQR {q3 - q1:.3f} "
        f"(tighter spread = less sensitive to the threshold)"
    )
