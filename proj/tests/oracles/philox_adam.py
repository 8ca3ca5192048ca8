"""Frozen reference values for test_tensor_core.cpp.

Philox4x64-10 blocks come from numpy's implementation; the Adam trajectory
is a plain float64 transcription of the update rule. Run with python3 and
paste the printed values if either definition ever changes.
"""
import math

import numpy as np

M64 = 2**64 - 1


def philox_block(counter, key):
    # numpy bumps the counter before producing a block, so start one below.
    c = list(counter)
    i = 0
    while i < 4:
        c[i] = (c[i] - 1) & M64
        if c[i] != M64:
            break
        i += 1
    bg = np.random.Philox(counter=c, key=list(key))
    return [int(v) for v in bg.random_raw(4)]


for counter, key in [((0, 0, 0, 0), (0, 0)), ((1, 0, 0, 0), (0, 0)), ((7, 0, 0, 0), (42, 3)),
                     ((2, 2, 3, 4), (5, 6))]:
    print(counter, key, ", ".join(f"0x{v:016x}ULL" for v in philox_block(counter, key)))


def grad(t, k):
    return math.sin(0.1 * t + k) * (k + 1)


p = [0.5, -0.25, 2.0]
m = [0.0] * 3
v = [0.0] * 3
b1, b2, lr, eps = 0.9, 0.999, 0.001, 1e-8
for t in range(1, 1001):
    for k in range(3):
        g = grad(t, k)
        m[k] = b1 * m[k] + (1 - b1) * g
        v[k] = b2 * v[k] + (1 - b2) * g * g
        mh = m[k] / (1 - b1**t)
        vh = v[k] / (1 - b2**t)
        p[k] -= lr * mh / (math.sqrt(vh) + eps)
    if t in (1, 2, 1000):
        print(t, ", ".join(repr(x) for x in p))
