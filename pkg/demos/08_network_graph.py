"""Channel arithmetic of the dense segmentation network family.

No tensors anywhere: the graph calculator tracks shapes and parameter
counts through dense blocks, transitions and skip joins, and shows why
the projection/addition variants undercut the concatenation variant.
"""

from cardiomr.netgraph import (
    NetConfig,
    build_graph,
    growth_sweep,
    quadratic_fit_r2,
    to_dot,
)

for variant in "ABC":
    g = build_graph(NetConfig(variant=variant, k=12, f=36))
    out = g.shapes[g.output_node.id]
    print(f"variant {variant}: {g.total_params:>9,} params, output {out}")

print("\ngrowth sweep (variant C, F = 3k):")
table = growth_sweep(NetConfig(variant="C"), range(2, 17, 2))
for k, params in table:
    print(f"  k={k:>2}: {params:>9,}")
print(f"quadratic fit R^2 = {quadratic_fit_r2(table):.6f}")

calibrated = NetConfig(variant="C", db_layers_down=(2, 3, 4),
                       db_layers_bottleneck=5, db_layers_up=(4, 3, 2))
cal = dict(growth_sweep(calibrated, [2, 12]))
print(f"\ndepths (2,3,4)/5/(4,3,2): k=2 -> {cal[2]:,} params, k=12 -> {cal[12]:,} params")

dot = to_dot(build_graph(NetConfig(variant="C", k=4, f=12)))
print(f"\nDOT export: {len(dot.splitlines())} lines, e.g.\n" + "\n".join(dot.splitlines()[:6]))
