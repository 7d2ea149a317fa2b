"""Shared-memory scaling of the accelerated right-hand side.

The size axis is split into equal blocks; weighting and output assembly
run per block, the independent core-fiber transforms spread across the
pool, and the per-frequency spectral chain is chunked.  Wall times below
follow the protocol of the bench subcommand: a discarded warm-up, then
the median of three timed integrations per worker count.  Results are
worker-count independent by construction, so the table is purely about
speed.
"""

import os

import numpy as np

from ttagg import (
    BrownianSpec,
    ConcentrationState,
    ExecutionPlan,
    InitialCondition,
    KernelSet,
    SimulationConfig,
    TimeGrid,
    build_brownian_tt,
    make_partition,
    rhs_total,
    run_scaling_benchmark,
)

n_classes = 1 << 16
spec = BrownianSpec((1 / 3, -1 / 3, 0.0))

print("=== block decomposition of the size axis ===")
partition = make_partition(n_classes, 4)
for p in range(1, 5):
    lo, hi = partition.bounds(p)
    print(f"block {p}: sizes {lo}..{hi}")

print()
print("=== result independence across worker counts ===")
rng = np.random.default_rng(4)
kernels = KernelSet({3: build_brownian_tt(spec, n_classes)})
state = ConcentrationState(rng.random(n_classes))
reference = rhs_total(kernels, state, ExecutionPlan(workers=1)).s
for workers in (2, 4):
    got = rhs_total(kernels, state, ExecutionPlan(workers=workers)).s
    spread = np.abs(got - reference).max() / np.abs(reference).max()
    print(f"workers={workers}: relative spread vs serial {spread:.1e}")

print()
print(f"=== wall times, ternary Brownian kernel, N = {n_classes}, 4 steps ===")
config = SimulationConfig(
    n_classes=n_classes,
    dimension=3,
    kernel_specs={3: spec},
    initial=InitialCondition.monodisperse(1.0),
    time=TimeGrid(0.0, 1e-3, 4),
    record_every=4,
)
report = run_scaling_benchmark(config, [1, 2, 4])
print(f"{'workers':>8s} {'time, sec':>12s} {'speedup':>9s}")
for p, t, s in report.rows():
    print(f"{p:8d} {t:12.4f} {s:9.2f}")
cores = os.cpu_count()
print(f"(this machine exposes {cores} cores; speedup saturates there)")
