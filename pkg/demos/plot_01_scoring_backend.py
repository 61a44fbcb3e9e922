"""
Scoring text with the n-gram backend
====================================

Train a small smoothed bigram model, then look at what it reports for each
token of a sentence: log-probability, competition rank and the entropy of
the predictive distribution.
"""

import numpy as np

from detectorbench import train_ngram

corpus = [
    "the cat sat on the mat . the dog sat on the log .",
    "a cat saw a dog . the dog saw the cat on a mat .",
]
model = train_ngram(corpus, order=2, delta=0.1)
print(model.backend_id, "vocabulary size", model.vocab_size)

# Per-token statistics. Rank 1 means the token was the model's top choice.
scoring = model.score_text("the cat sat on the log .")
for s in scoring:
    print(f"{s.token:>5}  log p = {s.log_prob:7.3f}  rank = {s.rank:2d}  H = {s.entropy:.3f}")

# Every next-token distribution is a proper distribution.
probs = model.next_distribution(model.tokenize("the"))
print("sum of P(. | the) =", probs.sum())
assert abs(probs.sum() - 1) < 1e-12

# Sampling at temperature 0 is greedy and ignores the seed.
print("greedy:", model.generate("the", 8, temperature=0.0))
print("T=1.0 :", model.generate("the", 8, temperature=1.0, seed=3))

# Saving and loading gives back the same model, bit for bit.
model.save("/tmp/demo-backend.json")
again = type(model).load("/tmp/demo-backend.json")
assert again.score_text("the cat sat") == model.score_text("the cat sat")
print("mean log p over the sentence:", np.round(scoring.log_probs.mean(), 4))
