"""Answer distributions, normalized entropy, and the selection functions.

Walks through the three-symbol answer machinery: raw first-token scores
become a probability vector, the vector gets an uncertainty in [0, 1], and
competing selection rules decide between answering and abstaining.
"""

from asknav import (
    VocabDistribution,
    normalized_uncertainty,
    select_energy,
    select_entropy,
    select_maxprob,
    shannon_entropy,
)

# A backend scores the three allowed answers for "Is the frame black?".
scores = {"Yes": 2.0, "No": 1.0, "IDK": 0.0}
dist = VocabDistribution.from_raw_scores(scores)
print("raw scores:", scores)
print("probabilities:", {k: round(v, 4) for k, v in dist.probs.items()})

# Shannon entropy over the three symbols, normalized by log(3) so that
# 0 means a one-hot answer and 1 means maximum confusion.
print("\nentropy H =", round(shannon_entropy(dist), 5))
estimate = normalized_uncertainty(dist, tau=0.75)
print("normalized u =", round(estimate.u, 5), "->", estimate.certainty.value, "(tau=0.75)")

# The same machinery on a confident and on a clueless answer:
for label, p in [("confident", (0.98, 0.01, 0.01)), ("clueless", (0.34, 0.33, 0.33))]:
    d = VocabDistribution.from_probs({"Yes": p[0], "No": p[1], "IDK": p[2]})
    e = normalized_uncertainty(d, tau=0.75)
    print(f"{label:>10}: u={e.u:.5f} -> {e.certainty.value}")

# Selection functions turn a distribution into answer-or-abstain.
print("\nselection functions on the (2, 1, 0) scores:")
print("  maxprob :", select_maxprob(dist, threshold=0.5))
print("  entropy :", select_entropy(dist, tau=0.75))
print("  energy  :", select_energy(scores, temperature=1.0, threshold=-1.5))

# The energy score is unbounded (it shifts with the logits); the normalized
# entropy lives in [0, 1] regardless, which makes threshold picking easier.
shifted = {k: v + 100.0 for k, v in scores.items()}
print("\nenergy of shifted scores:", round(select_energy(shifted, 1.0, 0.0).score, 4))
print("entropy of shifted scores:", round(
    normalized_uncertainty(VocabDistribution.from_raw_scores(shifted), 0.75).u, 5
))
