"""
Measured against predicted depth
================================

Random trees shaped like four public datasets, classified under both
schemes. The closed-form depth bounds the measured one.
"""
from pdte import DATASETS, bench

print(f"{'dataset':14s} {'scheme':6s} {'mults':>8s} {'depth':>5s} {'bound':>5s} {'outs':>4s} ok")
for shape in DATASETS.values():
    for scheme, packing in (("bin", "label"), ("int", "output")):
        r = bench(shape, scheme, mu=16, packing=packing, slots=64, seed=1)
        print(f"{shape.name:14s} {scheme:6s} {r.report.mult_count:8d} {r.report.max_depth:5d} "
              f"{r.predicted.max_depth:5d} {r.report.output_ctxt_count:4d} {r.correct}")
