"""Build the word graph of a sentence and push features through SAGE layers."""
import numpy as np

from aste_grid import generate_synthetic
from aste_grid.textgraph import GnnStack, build_graph, gnn_encode

s = generate_synthetic(3, 4)[2]
print(" ".join(f"{k}:{w}" for k, w in enumerate(s.tokens)))
print("arcs:", [(a.head, a.dependent, a.label) for a in s.deps])

g = build_graph(s.sentence, s.deps)
for v in range(g.n):
    kinds = ", ".join(f"{u}/{kind}" for u, kind in sorted(g.neighbors[v]))
    print(f"  {s.tokens[v]:>10}: {kinds}")

rng = np.random.default_rng(0)
H = rng.normal(size=(s.n, 8))

for aggregator in ("mean", "lstm"):
    stack = GnnStack.init(8, 6, 3, aggregator, np.random.default_rng(1))
    out = gnn_encode(stack, g, H).data
    print(aggregator, "output", out.shape, "mean activation", round(float(out.mean()), 4))

# a node's first-layer output only depends on its own neighborhood
stack = GnnStack.init(8, 6, 1, "mean", np.random.default_rng(1))
before = gnn_encode(stack, g, H).data
H2 = H.copy()
H2[0] += 1.0
after = gnn_encode(stack, g, H2).data
changed = np.flatnonzero(np.abs(after - before).sum(axis=1) > 0)
print("nodes touched by editing word 0:", changed.tolist(), "neighborhood:", g.nodes_of(0))
