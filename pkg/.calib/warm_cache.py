"""Populate the acceptance-farm cache (scratch driver, not shipped)."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
sys.path.insert(0, "/root/pkg/tests")

import acceptance_lib as A


def run(name, cfg):
    t0 = time.time()
    out = A.cached_farm(cfg)
    print(f"{name}: {time.time()-t0:.0f}s excluded="
          f"{int(np.count_nonzero(out['exploded']))}", flush=True)
    return out


# 1) mean-law farms (quick, validates the engine broadly)
for i in range(len(A.MEANLAW_CONFIGS)):
    run(f"meanlaw[{i}] {A.MEANLAW_CONFIGS[i][5]}", A.meanlaw_config(i))

# 2) d = 3 fluctuation farms
for T in A.D3_T_GRID:
    out = run(f"d3 T={T}", A.d3_farm_config(T))
    X = out["occupation"][:, -1, 0] - out["cond_mean"][:, -1, 0]
    F = T ** 0.75
    print(f"   MAD/F={np.median(np.abs(X - np.median(X)))/F:.4f} "
          f"sd/F={X.std()/F:.4f}", flush=True)

# 3) laplace farms
for i in range(len(A.LAPLACE_CONFIGS)):
    out = run(f"laplace[{i}]", A.laplace_farm_config(i))
    v = np.exp(-out["occupation"][~out["exploded"], -1, 0])
    print(f"   mc={v.mean():.5f} se={v.std()/np.sqrt(v.size):.5f}", flush=True)

# 4) d = 1 high-density farm
out = run("d1 HD", A.d1_highdensity_config())

# 5) stability farms
for b in (1.0, 0.5):
    out = run(f"stability beta={b}", A.stability_config(b))
    X = out["occupation"][:, -1, 0] - out["cond_mean"][:, -1, 0]
    from occufluct.fluctuations import estimate_stability_index
    est = estimate_stability_index(X)
    print(f"   index={est.index:.3f} sens={est.band_sensitivity:.3f} "
          f"skew+={est.skew_positive}", flush=True)

# 6) extinction farms
for h in A.EXT_D1_HORIZONS:
    out = run(f"ext d1 h={h}", A.extinction_d1_config(h))
    e = out["extinction"][~out["exploded"], 0]
    print(f"   frac={np.mean(np.isfinite(e) & (e < h)):.3f}", flush=True)
for h in A.EXT_D3_HORIZONS:
    out = run(f"ext d3 h={h}", A.extinction_d3_config(h))
    print(f"   mean occ={out['occupation'][:, -1, 0].mean():.2f}", flush=True)

print("warm cache complete", flush=True)
