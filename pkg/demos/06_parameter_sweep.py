"""Threshold sweep: FPR, FNR and macro-F1 over 10 thresholds in [2^L, 2^(L+2)].

Benign hosts that open their sessions like a RAT family push some benign
scores above 2^L; raising the threshold trades those false positives
against missed detections.
"""

import math

from mbtree.evaluate import sweep
from mbtree.synthgen import BENIGN_TEMPLATE, gen_host, lookalike_templates, rat_templates

rats = rat_templates(7)
train = [(r.label, gen_host(r, 1000 + i)) for i, r in enumerate(rats)]
test = [(gen_host(r, 9000 + 100 * i + j), r.label) for i, r in enumerate(rats) for j in range(5)]
test += [(gen_host(BENIGN_TEMPLATE, 5000 + j), "benign") for j in range(60)]
test += [(gen_host(t, 7000 + 10 * i + j), "benign") for i, t in enumerate(lookalike_templates(rats)) for j in range(3)]

rows = sweep(train, test, alphas=[0.3], betas=[0.7], levels=[5, 10, 15, 20], jobs=4)
for L in (5, 10, 15, 20):
    print(f"L={L}")
    for r in rows:
        if r["L"] == L:
            print(f"  theta=2^{math.log2(r['theta']):5.2f}  FPR {r['fpr']:5.1f}%  FNR {r['fnr']:5.1f}%  macro-F1 {r['macro_f1']:5.1f}%")
