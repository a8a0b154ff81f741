"""Probe: derive frozen values for the experiment driver (acceptance #10 counts,
pencil-intersect measures, kt-refine certs, direction-exponent fits, tube cert)."""
import sys, time
from fractions import Fraction as F

sys.path.insert(0, "tests")
import oracles

from deltagrid.construct import CantorSpec, cantor_set, ap_set, gp_set, product_pencils
from deltagrid.grid import GridSet1D, GridSet2D, covering_number, inflate, nonconcentration_check
from deltagrid.arith import sumset, productset
from deltagrid.refine import RefineParams, kt_refine
from deltagrid.radial import (DiscreteMeasure2D, TubeConditionParams, direction_set,
                              exponent_fit, pinned_exponent, tube_condition_refine)
from deltagrid.tubes import rasterize_pencil, intersection_measure
import numpy as np

print("=== sumprod fixtures at m=12 (oracle counts) ===")
m = 12
fixtures = {}
ap = ap_set(16, 2 ** (m - 7), m, start=2 ** (m - 2))
fixtures["ap16"] = ap
gp = gp_set(F(1, 2), 6, m)
fixtures["gp6"] = gp
ca = cantor_set(CantorSpec(2, 4, m // 2, (0, 3)))
fixtures["cantor"] = ca

for name, a in fixtures.items():
    gl = [int(a.lo * 2**m) + i for i in a.indices.tolist()]
    na = len(gl)
    osum = oracles.oracle_sumset(range(na), a.lo, range(na), a.lo, m) if False else oracles.oracle_sumset(a.indices.tolist(), a.lo, a.indices.tolist(), a.lo, m)
    oprod = oracles.oracle_product(a.indices.tolist(), a.lo, a.indices.tolist(), a.lo, m)
    ssum = sumset(a, a)
    sprod = productset(a, a)
    # dual-route consistency on globals
    sg = set((np.nonzero(ssum.cells)[0] + int(ssum.lo * 2**m)).tolist())
    pg = set((np.nonzero(sprod.cells)[0] + int(sprod.lo * 2**m)).tolist())
    assert sg == osum, f"{name}: sumset impl != oracle"
    assert pg == oprod, f"{name}: productset impl != oracle"
    nsum, nprod = len(osum), len(oprod)
    print(f"{name}: #A={na}  |A+A|={nsum} ({nsum/na:.3f}|A|)  |AA|={nprod} ({nprod/na:.3f}|A|)  max/|A|={max(nsum,nprod)/na:.3f}")
    if name == "ap16":
        print(f"   ap16 clauses: sum<=4|A|: {nsum <= 4*na}   prod>=8|A|: {nprod >= 8*na}")
    if name == "gp6":
        print(f"   gp6 clauses: prod<=4|A|: {nprod <= 4*na}   sum>=8|A|: {nsum >= 8*na}")
    if name == "cantor":
        print(f"   cantor clause: max>=8|A|: {max(nsum, nprod) >= 8*na}")

print()
print("=== sumprod-growth sweep (cantor, m=4..12 even) ===")
pts = []
for mm in (4, 6, 8, 10, 12):
    a = cantor_set(CantorSpec(2, 4, mm // 2, (0, 3)))
    na = a.count
    g = max(sumset(a, a).count, productset(a, a).count) / na
    pts.append((F(1, 2**mm), g))
    print(f"m={mm}: #A={na} growth={g:.4f}")
fit = exponent_fit(pts)
print(f"fit slope={fit.slope:.6f} intercept={fit.intercept:.6f} residual={fit.residual:.6f}")

print()
print("=== sumprod-growth sweep (ap16, m=8..12) ===")
pts = []
for mm in (8, 9, 10, 11, 12):
    a = ap_set(16, 2 ** (mm - 7), mm, start=2 ** (mm - 2))
    na = a.count
    g = max(sumset(a, a).count, productset(a, a).count) / na
    pts.append((F(1, 2**mm), g))
    print(f"m={mm}: #A={na} growth={g:.4f}")
fit = exponent_fit(pts)
print(f"fit slope={fit.slope:.6f} residual={fit.residual:.6f}")

print()
print("=== pencil-intersect (middle-half cantor pattern embedded in [1/4,1/2)) ===")
for d in (2, 3, 4):
    pat = cantor_set(CantorSpec(2, 4, d, (0, 3)))
    mm = pat.m + 2
    stride = 1  # pattern.m = 2d, embed at m = 2d+2 scaled by 1
    # embed: global cell = 2**(mm-2) + i * (2**(mm-2-pat.m)) .. block fill
    kb = 2 ** (mm - 2 - pat.m)
    base = 2 ** (mm - 2)
    cells = np.zeros(2 ** (mm - 2), dtype=bool)
    for i in pat.indices.tolist():
        cells[i * kb : (i + 1) * kb] = True
    a = GridSet1D(mm, F(1, 4), F(1, 2), cells)
    t0 = time.time()
    pens = product_pencils(a)
    lo, hi = (F(1, 4), F(1, 4)), (F(1, 2), F(1, 2))
    rasters = [rasterize_pencil(p, mm, lo=lo, hi=hi) for p in pens]
    meas = intersection_measure(rasters)
    dt = time.time() - t0
    na = a.count
    delta = F(1, 2**mm)
    lower = na * na * delta * delta
    print(f"d={d} m={mm}: #A={na} ntubes={[p.ntubes for p in pens]} measure={meas} "
          f"cells={int(meas / (delta*delta))} lower={lower} ratio_to_delta={float(meas)/float(delta):.4f} ({dt:.2f}s)")
    assert meas >= lower

print()
print("=== kt-refine fixtures (m=10, sigma=.5, k=2, eps=.05) ===")
p = RefineParams(0.5, 2.0, 0.05)
mm = 10
const = 2.0 * (2 ** (mm * p.k * p.eps))
print(f"a_star check constant C = 2*delta^(-k*eps) = {const}")
rng = np.random.default_rng(7)
fx = {
    "interval16": GridSet1D.from_indices(mm, range(16)),
    "cantor": cantor_set(CantorSpec(2, 4, 5, (0, 3))),
}
count_cap = int(4 * 2 ** (mm * 0.5))
sel = rng.choice(2**mm, size=count_cap, replace=False)
cells = np.zeros(2**mm, dtype=bool); cells[sel] = True
fx["random"] = GridSet1D(mm, F(0), F(1), cells)
for name, a in fx.items():
    dec = kt_refine(a, p)
    cert = nonconcentration_check(dec.a_star, p.sigma, const)
    print(f"{name}: #A={a.count} heavy_scales={sorted(dec.heavy_parts)} "
          f"#A*={dec.a_star.count} covers={dec.covers_source()} noncon_ok={cert.ok}"
          + ("" if cert.ok else f" witness={cert.witness}"))

print()
print("=== direction-exponent: E = C1/2 x C1/2 ===")
for d, scales_hi in ((4, 6), (5, 8)):
    pat = cantor_set(CantorSpec(2, 4, d, (0, 3)))
    mm = pat.m
    e = GridSet2D(mm, (F(0), F(0)), (F(1), F(1)), pat.cells[:, None] & pat.cells[None, :])
    t0 = time.time()
    s = direction_set(e)
    dt = time.time() - t0
    scales = [F(1, 2**k) for k in range(2, scales_hi + 1)]
    counts = [(r, covering_number(s, r)) for r in scales]
    fit = exponent_fit(counts)
    t1 = time.time()
    pf = pinned_exponent((2, 2), e, scales)
    dt2 = time.time() - t1
    print(f"d={d} m={mm}: #E={e.count} #S={s.count} ({dt:.1f}s) counts={[(str(r), c) for r, c in counts]}")
    print(f"   fit slope={fit.slope:.6f} intercept={fit.intercept:.6f} residual={fit.residual:.6f}")
    print(f"   pinned slope={pf.slope:.6f} residual={pf.residual:.6f} ({dt2:.1f}s)")
    print(f"   clauses: slope>=0.5 {fit.slope >= 0.5}  resid<=0.15 {fit.residual <= 0.15}  pinned>=0.4 {pf.slope >= 0.4}")

print()
print("=== tube-condition small fixture (d=3 pattern in [0,1/2)^2, shift (1.5,1.5)) ===")
d = 3
pat = cantor_set(CantorSpec(2, 4, d, (0, 3)))
mm = pat.m  # 6
half = np.zeros(2**mm, dtype=bool)
half[: 2 ** (mm - 1)] = pat.cells[::2][: 2 ** (mm - 1)] if False else half[: 2 ** (mm - 1)]
# scale pattern into [0,1/2): use pattern at depth d on m-1 bits? simplest: embed indices/2
# pattern cells at m=2d: value i*2^-m; want in [0,1/2): global cell = i (window [0,1/2) has 2^(m-1) cells at scale m)
cells2 = np.zeros(2 ** (mm - 1), dtype=bool)
for i in pat.indices.tolist():
    if i < 2 ** (mm - 1):
        cells2[i] = True
# that truncates; instead shrink by one scale: embed pattern at scale m into window [0,1/2) at scale m+1
mm2 = mm + 1
sup_cells = np.zeros((2**mm2, 2**mm2), dtype=bool)
axis = np.zeros(2**mm2, dtype=bool)
for i in pat.indices.tolist():
    axis[i] = True  # value i*2^-(m+1) in [0,1/2)
mu_sup = GridSet2D(mm2, (F(0), F(0)), (F(1), F(1)), axis[:, None] & axis[None, :])
nu_axis_lo = F(3, 2)
nu_sup = GridSet2D(mm2, (nu_axis_lo, nu_axis_lo), (nu_axis_lo + 1, nu_axis_lo + 1), axis[:, None] & axis[None, :])
smu = 2 * (0.5)  # sigma=1/2 per axis
t0 = time.time()
mu = DiscreteMeasure2D.uniform(mu_sup, 1.0)
nu = DiscreteMeasure2D.uniform(nu_sup, 1.0)
print(f"mu: #sup={mu_sup.count} c={mu.c:.4f}  nu c={nu.c:.4f}")
params = TubeConditionParams(eta=0.1, rho=0.5, eps=1.0, k0=1, kmax=2)
mask, cert = tube_condition_refine(mu, nu, params)
dt = time.time() - t0
print(f"ok={cert.ok} violations={len(cert.violations)} retained={cert.retained_mass!r} ({dt:.1f}s)")
for r in cert.scale_reports:
    print(f"  k={r.k} delta={r.delta} side={r.side} tubes={r.n_tubes} heavy={r.n_heavy} "
          f"reps={r.n_reps}<= {r.rep_bound:.1f} flagged={r.n_flagged} removed={r.pairs_removed}")
