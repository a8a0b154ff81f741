"""Failure-rate probe: a_star nonconcentration at C = 2*delta^(-K*eps), m=10."""
import numpy as np
from fractions import Fraction as F
from deltagrid.grid import GridSet1D, nonconcentration_check
from deltagrid.refine import RefineParams, kt_refine

p = RefineParams(0.5, 2.0, 0.05)
m = 10
n = 2**m
cap = int(4 * 2 ** (m * (1 - p.sigma)))  # max cell count under the hypothesis
const = 2.0 * 2 ** (m * p.k * p.eps)
print(f"cap={cap} C={const}")

rng = np.random.default_rng(0)
for size in (32, 64, 96, 112, 128):
    fails = 0
    worst = None
    for t in range(200):
        idx = rng.choice(n, size=size, replace=False)
        a = GridSet1D.from_indices(m, idx.tolist())
        dec = kt_refine(a, p)
        cert = nonconcentration_check(dec.a_star, p.sigma, const)
        if not cert.ok:
            fails += 1
            worst = cert.witness
    print(f"uniform size={size}: fails={fails}/200" + (f" e.g. {worst}" % () if worst else ""))

# clustered draws: a few random intervals plus noise
for nint, ilen, noise in ((2, 24, 40), (3, 16, 40), (4, 20, 20)):
    fails = 0
    for t in range(200):
        cells = np.zeros(n, dtype=bool)
        starts = rng.choice(n - ilen, size=nint, replace=False)
        for s in starts:
            cells[s : s + ilen] = True
        pts = rng.choice(n, size=noise, replace=False)
        cells[pts] = True
        if cells.sum() > cap:
            continue
        a = GridSet1D(m, F(0), F(1), cells)
        dec = kt_refine(a, p)
        cert = nonconcentration_check(dec.a_star, p.sigma, const)
        if not cert.ok:
            fails += 1
    print(f"intervals x{nint} len={ilen} noise={noise}: fails={fails}/200")
