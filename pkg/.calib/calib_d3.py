"""Pilot calibration of the d = 3 fluctuation farms (scratch, not shipped)."""
import sys
import time

import numpy as np

sys.path.insert(0, "/root/pkg/src")
from occufluct.branching import FarmConfig, InitialFieldSpec, MeasureForm, run_farm
from occufluct.observables import BallIndicator
from occufluct.regimes import ModelParams, classify_regime, norming_factor
from occufluct.fluctuations import mad
from occufluct.limits.oracle import gaussian_covariance_oracle

V = 0.025
RHO = 2.85
N_STEPS = 512
N_REP = 700
T_GRID = [20.0, 40.0, 80.0, 160.0]

obs = (BallIndicator((0.0, 0.0, 0.0), 1.0),)
results = {}
for T in T_GRID:
    par = ModelParams(3, 2, 1, 0, v_rate=V)
    R = RHO * np.sqrt(T) + 1.0
    fs = InitialFieldSpec(par, 1.0, R, MeasureForm.SMOOTHED)
    cfg = FarmConfig(fs, obs, T, N_STEPS, N_REP, seed=1000 + int(T),
                     checkpoints=(0.25, 0.5, 0.75, 1.0),
                     conditional_centering=True)
    t0 = time.time()
    out = run_farm(cfg, workers=2)
    wall = time.time() - t0
    X = out.occupation[:, :, 0] - out.cond_mean[:, :, 0]
    rep = classify_regime(par)
    F = norming_factor(rep, T, 1.0)
    results[T] = dict(X=X, wall=wall, F=F)
    m = mad(X[:, -1] / F)
    print(f"T={T}: wall={wall:.0f}s MAD(X_T(1))={m:.4f} sd={np.std(X[:,-1]/F):.4f}", flush=True)

np.savez("/root/pkg/.calib/d3_pilot.npz",
         **{f"X_{int(T)}": results[T]["X"] for T in T_GRID},
         **{f"F_{int(T)}": results[T]["F"] for T in T_GRID},
         walls=np.array([results[T]["wall"] for T in T_GRID]))

# flatness of MAD across T
mads = np.array([mad(results[T]["X"][:, -1] / results[T]["F"]) for T in T_GRID])
print("MAD flatness (max/min - 1):", mads.max() / mads.min() - 1.0, flush=True)

# correlation at T=160 vs limit oracle
ts = np.array([0.25, 0.5, 0.75, 1.0])
X = results[160.0]["X"]
C = X.T @ X / X.shape[0]
corr = C / np.sqrt(np.outer(np.diag(C), np.diag(C)))
par = ModelParams(3, 2, 1, 0, v_rate=V)
O = np.array([[gaussian_covariance_oracle(par, float(s), float(t))
               for t in ts] for s in ts])
corr_o = O / np.sqrt(np.outer(np.diag(O), np.diag(O)))
print("corr err max:", np.abs(corr - corr_o).max(), flush=True)
print("emp corr:\n", np.round(corr, 4), flush=True)
print("oracle corr:\n", np.round(corr_o, 4), flush=True)
