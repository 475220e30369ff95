#!/usr/bin/env python3
"""Train the smoothed n-gram provider and inspect its next-token logits."""

import numpy as np

from dpsynth import train_ngram

corpus = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "the cat ran to the dog",
]
model = train_ngram([list(line) for line in corpus], order=3, smoothing=0.5)
vocab = model.vocab
print(f"character trigram model, vocabulary size {vocab.size} (incl. EOS)")

for context in ("the c", "sat o", "gc"):
    ids = vocab.encode(list(context))
    probs = np.exp(model.logits(ids))
    top = np.argsort(probs)[::-1][:3]
    shown = ", ".join(f"{vocab.token_of(int(t))!r}: {probs[t]:.3f}" for t in top)
    print(f"  after {context!r}: {shown}")

print()
print("probabilities renormalize exactly:", float(np.exp(model.logits(ids)).sum()))
print("an unseen context ('gc' never occurs) falls back to the uniform distribution:")
unseen = np.exp(model.logits(vocab.encode(list("gc"))))
print(f"  every token gets {unseen[0]:.6f} = 1/{vocab.size}")
