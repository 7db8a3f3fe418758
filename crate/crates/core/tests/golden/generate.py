"""Writes the encoder golden files. Run once: python3 generate.py

Separate implementation of the record-to-image pipeline built on numpy and
torch's bilinear interpolation (align_corners=True).
"""
import json
import math

import numpy as np
import torch
import torch.nn.functional as F

rng = np.random.default_rng(20240611)


def resize_threshold(vec, rows, cols, target, thr):
    m = torch.tensor(np.asarray(vec, dtype=np.float64).reshape(rows, cols))[None, None]
    big = F.interpolate(m, size=(target, target), mode="bilinear", align_corners=True)[0, 0].numpy()
    return (big > thr).astype(np.uint8).ravel()


def bits_line(bits):
    return "".join(str(int(b)) for b in bits)


# layered-material records: 5 categorical features and 2 flags, 81 one-hot bits
widths = [16, 16, 16, 13, 16]
schema = {"features": []}
for i, w in enumerate(widths):
    schema["features"].append(
        {"kind": "categorical", "name": f"param{i}", "vocabulary": [f"v{j}" for j in range(w)]}
    )
for name in ["flag_a", "flag_b"]:
    schema["features"].append({"kind": "boolean", "name": name})
with open("mos2_schema.json", "w") as f:
    json.dump(schema, f, indent=1)

records, onehots, images = [], [], []
for _ in range(6):
    cats = [int(rng.integers(w)) for w in widths]
    flags = [bool(rng.integers(2)) for _ in range(2)]
    records.append(",".join([f"v{c}" for c in cats] + ["true" if b else "false" for b in flags]))
    oh = []
    for c, w in zip(cats, widths):
        block = [0] * w
        block[c] = 1
        oh += block
    for b in flags:
        oh += [0, 1] if b else [1, 0]
    assert len(oh) == 81
    onehots.append(oh)
    images.append(resize_threshold(oh, 9, 9, 100, 0.1))
with open("mos2_records.csv", "w") as f:
    f.write("\n".join(records) + "\n")
with open("mos2_onehot.txt", "w") as f:
    f.write("\n".join(bits_line(b) for b in onehots) + "\n")
with open("mos2_images.txt", "w") as f:
    f.write("\n".join(bits_line(b) for b in images) + "\n")

# 144 selected mutation flags
drug_in = [rng.integers(2, size=144) for _ in range(6)]
with open("drug_bits.txt", "w") as f:
    f.write("\n".join(bits_line(b) for b in drug_in) + "\n")
with open("drug_images.txt", "w") as f:
    f.write("\n".join(bits_line(resize_threshold(b, 12, 12, 100, 0.5)) for b in drug_in) + "\n")

# cart-pole states
X, TH, BINS = 4.8, 0.418, 25


def linear_bin(v, lim):
    v = min(max(v, -lim), lim)
    return min(int(math.floor((v + lim) / (2 * lim) * BINS)), BINS - 1)


def sigmoid_bin(v):
    return min(int(math.floor(1 / (1 + math.exp(-v)) * BINS)), BINS - 1)


states = [
    (0.0, 0.0, 0.0, 0.0),
    (4.8, -0.418, 3.0, -3.0),
    (-5.1, 0.5, -0.2, 0.7),
    (1.234, 0.05, -1.5, 2.5),
]
states += [tuple(float(v) for v in rng.normal(0, [1.5, 0.15, 1.0, 1.5])) for _ in range(6)]
lines, imgs = [], []
for s in states:
    idx = [linear_bin(s[0], X), linear_bin(s[1], TH), sigmoid_bin(s[2]), sigmoid_bin(s[3])]
    oh = np.zeros(100)
    for k, i in enumerate(idx):
        oh[k * BINS + i] = 1
    lines.append(",".join(repr(v) for v in s))
    imgs.append(resize_threshold(oh, 10, 10, 100, 0.01))
with open("cartpole_states.csv", "w") as f:
    f.write("\n".join(lines) + "\n")
with open("cartpole_images.txt", "w") as f:
    f.write("\n".join(bits_line(b) for b in imgs) + "\n")
