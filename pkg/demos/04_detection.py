"""End-to-end detection on a synthetic population, against the flow-level baseline.

Seven RAT families share a fixed handshake but two packet sizes depend on
the victim. MBTree matches trees of whole hosts, so those two positions
only cost a little; a per-session cosine match needs the whole sequence.
"""

from mbtree.detect import Verdict, detect_hosts, dirpiz_seq_baseline
from mbtree.dirpiz import extract_head
from mbtree.evaluate import build_signature_set, metrics, outcome
from mbtree.similarity import ScoreParams
from mbtree.synthgen import BENIGN_TEMPLATE, gen_host, rat_templates

L = 10
rats = rat_templates(7)
train = [(r.label, gen_host(r, 1000 + i)) for i, r in enumerate(rats)]
sigs = build_signature_set(train, L)

test = [(gen_host(r, 9000 + 100 * i + j), r.label) for i, r in enumerate(rats) for j in range(10)]
test += [(gen_host(BENIGN_TEMPLATE, 5000 + j), "benign") for j in range(100)]

reports = detect_hosts([h for h, _ in test], sigs, ScoreParams(), jobs=4)
m = metrics(outcome(r.host, truth, r.verdict, r.predicted_label) for r, (_, truth) in zip(reports, test))
print(f"MBTree     FPR {m.fpr:5.1f}%  FNR {m.fnr:5.1f}%  Acc {m.acc:5.1f}%  macro-F1 {m.macro_f1:5.1f}%")

rat_scores = [r.max_score for r, (_, t) in zip(reports, test) if t != "benign"]
benign_scores = [r.max_score for r, (_, t) in zip(reports, test) if t == "benign"]
print(f"log2 scores: RAT min {min(rat_scores):.2f}, benign max {max(benign_scores):.2f}, threshold 11")

sig_seqs = [extract_head(s, L) for _, tr in train for s in tr.sessions]
flagged = [dirpiz_seq_baseline(h, sig_seqs, 0.99) is Verdict.MALICIOUS for h, _ in test]
rat_flags = [f for f, (_, t) in zip(flagged, test) if t != "benign"]
benign_flags = [f for f, (_, t) in zip(flagged, test) if t == "benign"]
print(f"DirPiz-Seq FPR {100 * sum(benign_flags) / len(benign_flags):5.1f}%  FNR {100 * (1 - sum(rat_flags) / len(rat_flags)):5.1f}%")
