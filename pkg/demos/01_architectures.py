"""Walk the embedded architecture families and their shape traces.

Run:  python demos/01_architectures.py
"""

from cubenn import param_count, registry, shape_trace, validate
from cubenn.netspec import REFERENCE_PARAM_COUNTS

print("=== Families a-e on a 103-band, 9-class scene (5x5 neighborhood) ===\n")
for family in "abcde":
    spec = registry(family, 5, 103, 9)
    convs = [l for l in spec.layers if l.kind != "fc"]
    fcs = [l.filters for l in spec.layers if l.kind == "fc"]
    print(f"family {family}: {len(convs)} conv layers, fc widths {fcs}, "
          f"{param_count(spec)} parameters")

print("\n=== Per-layer trace of the 8-conv family d ===\n")
spec = registry("d", 5, 103, 9)
print(f"input voxel: 1 x 103 x 5 x 5")
for layer, shape in zip(spec.layers, shape_trace(spec)):
    if layer.kind == "fc":
        print(f"  {layer.kind:<9} -> [{shape[0]}]")
    else:
        geom = "x".join(map(str, layer.kernel))
        print(f"  {layer.kind:<9} {layer.filters:>2} filters, kernel {geom:<6} -> {shape}")

print("\nThe spectral axis halves at every stride-2 layer (103 -> 52 -> 26 -> 13 -> 7)")
print("while the two leading 3x3 kernels collapse the 5x5 neighborhood to a point.\n")

print("=== Budgets against the published reference counts ===\n")
for (family, n, f, nclass), ref in sorted(REFERENCE_PARAM_COUNTS.items()):
    count = param_count(registry(family, n, f, nclass))
    print(f"family {family} n={n} f={f} classes={nclass}: "
          f"{count} params (reference {ref}, delta {count - ref:+d})")

print("\nEvery flooring decision the trace makes is reported:")
for note in validate(registry("d", 5, 103, 9)):
    print(f"  note: {note}")
