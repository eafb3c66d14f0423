"""The selective scan, its oracle, and compute scaling in patch count/length.

First verifies the vectorized scan against the naive step-by-step recurrence,
then measures forward-pass FLOPs over a grid of subgraph counts (L) and
lengths (M), confirming the per-axis linear growth.
"""
import numpy as np

from meshsal import ModelConfig, SaliencyModel, measure_flops, ssm_scan, ssm_scan_reference
from meshsal.autodiff import Tensor
from meshsal.ssm import init_ssm_params
from meshsal.synth import icosphere

rng = np.random.default_rng(0)
p = init_ssm_params(rng, d=32, n=16)
u = rng.normal(size=(48, 32))
fast = ssm_scan(p, Tensor(u)).data
slow = ssm_scan_reference(p.a_log.data, p.w_delta.data, p.b_delta.data, p.w_b.data, p.w_c.data, u)
print(f"scan vs naive recurrence: max abs err {np.abs(fast - slow).max():.3g}")

mesh = icosphere(3)
print(f"\nFLOPs per forward pass on a {mesh.n_faces}-face mesh:")
print(f"{'L':>6} {'M':>6} {'MFLOPs':>10}")
rows = {}
for L in (64, 128, 256):
    for M in (16, 32, 64):
        cfg = ModelConfig(n_centers=L, subgraph_len=M, d_enc=32, d_tok=64, n_state=8, n_blocks=2)
        flops = measure_flops(SaliencyModel(cfg), mesh, seed=0)
        rows[(L, M)] = flops
        print(f"{L:>6} {M:>6} {flops / 1e6:>10.2f}")

for M in (16, 32, 64):
    ys = [rows[(L, M)] for L in (64, 128, 256)]
    ratio = (ys[2] - ys[1]) / (ys[1] - ys[0])
    print(f"M={M}: FLOP increment ratio L 128->256 vs 64->128 = {ratio:.3f} (2.0 = linear)")
