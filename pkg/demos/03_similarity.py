"""Path and node similarity on a small hand-made example.

The test host shares the signature's first two levels but swapped the
third message; node similarity still credits the deeper values that line
up, path similarity stops where the chain breaks.
"""

from mbtree.mltree import Signature, build
from mbtree.similarity import ScoreParams, common_nodes, cwp, node_log2, path_log2, score_components

L = 4
sig_seqs = [[120, -48, 33, -900]] * 6 + [[120, -48, 61, -900]] * 2
test_seqs = [[120, -48, 77, -900]] * 5

sig_tree, test_tree = build(sig_seqs, L), build(test_seqs, L)
c = cwp(test_tree, sig_tree)
n = common_nodes(test_tree, sig_tree)
print("CWP depth L' =", c.depth)
for level, edges in enumerate(c.levels):
    print(f"  level {level}: {edges}")
print("common nodes:", [dict(lv) for lv in n.levels])
print(f"log2 path score {path_log2(c, sig_tree, 1.0):.3f}, log2 node score {node_log2(n, sig_tree, 1.0):.3f}")

sig = Signature("demo", sig_tree, sig_tree, 600.0)
for test_duration in (300.0, 600.0, 1200.0):
    test = Signature("host", test_tree, test_tree, test_duration)
    comp = score_components(test, sig)
    print(f"test window {test_duration:6.0f} s -> combined log2 score {comp.combine(0.3, 0.7):.3f}")
print("threshold log2:", ScoreParams().log2_theta)
