"""
How in-context examples move accuracy
=====================================

Accuracy grows with the log of a power of the number of examples held in
context. Here we print the curve for the two GPT entries of the default
catalog, and for the arithmetic task where the small model gets worse.
"""

import numpy as np

from pfmcache.catalog import default_catalog
from pfmcache.context import accuracy

ks = np.array([0, 1, 2, 4, 8, 16, 64, 256, 1024, 2048])

# translation: both models improve with more examples
for m in default_catalog("translation")[:2]:
    print(m.id, " ".join(f"{accuracy(m, k):.3f}" for k in ks))

# arithmetic: a negative exponent means the 13B model loses accuracy
for m in default_catalog("arithmetic")[:2]:
    print(m.id, " ".join(f"{accuracy(m, k):.3f}" for k in ks))

# the zero-shot value is returned exactly, with no power term involved
big = default_catalog()[1]
print("K=0 is A0/100:", accuracy(big, 0) == big.acc_zero / 100, " K=64:", round(accuracy(big, 64), 6))
