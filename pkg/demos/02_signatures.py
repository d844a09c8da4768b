"""From sessions to head/tail sequences, MLTrees and a signature file."""

import json
import tempfile
from pathlib import Path

from mbtree.dirpiz import extract_head, extract_tail
from mbtree.mltree import build_signature, load_signatures, save_signatures
from mbtree.synthgen import rat_templates, gen_host

L = 6
template = rat_templates(1)[0]
trace = gen_host(template, seed=3)

print("first two sessions:")
for s in trace.sessions[:2]:
    print("  head", extract_head(s, L).values)
    print("  tail", extract_tail(s, L).values)

sig = build_signature(trace, template.label, L)
print(f"\nhead tree of {sig.label} ({len(trace.sessions)} sessions, {sig.duration:.0f} s):")
for level in range(L):
    nodes = dict(sorted(sig.head.nodes[level].items()))
    print(f"  level {level}: {len(sig.head.edges[level])} edges, nodes {nodes}")
# the dynamic slot at position 3 is drawn once per host here, so every level stays a single node

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "sig.json"
    save_signatures([sig], path, L)
    doc = json.loads(path.read_text())
    print(f"\nsignature file: version {doc['version']}, L={doc['L']}, {path.stat().st_size} bytes")
    L_back, (back,) = load_signatures(path)
    print("reloads equal:", (back.head, back.tail) == (sig.head, sig.tail))
