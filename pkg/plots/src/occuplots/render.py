"""Figure rendering: seven kinds, one entry point.

Deterministic output: fixed style, Agg backend, pinned PNG metadata, so
re-rendering the same inputs is byte-identical.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import SchemaError, load_csv  # noqa: E402

KINDS = ("regime-atlas", "scaling-fit", "covariance", "extinction",
         "lrd-decay", "limit-paths", "laplace-validation")

_STYLE = {
    "figure.figsize": (7.0, 5.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}
_META = {"Software": "occuplots"}


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: dict                  # name -> csv path
    output: str
    overlays: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")


def _save(fig, spec: FigureSpec):
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_META)
    plt.close(fig)
    return out


def _case_palette(cases):
    order = sorted(set(cases))
    return {c: i for i, c in enumerate(order)}, order


def render_regime_atlas(spec: FigureSpec):
    cols = load_csv(spec.inputs["sweep"],
                    ("d", "gamma", "case_id", "d_crit"))
    d = cols["d"].astype(float)
    g = cols["gamma"].astype(float)
    cases = [str(c) for c in cols["case_id"]]
    lut, order = _case_palette(cases)
    fig, ax = plt.subplots()
    colors = plt.get_cmap("tab10")
    for c in order:
        m = np.array([x == c for x in cases])
        ax.scatter(g[m], d[m], s=55, marker="s",
                   color=colors(lut[c] % 10), label=c)
    # boundary curve from the CSV's own d_crit values (no recomputation)
    gg = np.unique(g)
    dc = np.array([np.nanmean(cols["d_crit"][g == gv]) for gv in gg])
    ax.plot(gg, dc, "k--", lw=1.2, label="critical dimension")
    ax.set_xlabel("gamma")
    ax.set_ylabel("d")
    ax.set_title("regime atlas")
    ax.legend(fontsize=7, loc="upper left")
    return _save(fig, spec)


def render_scaling_fit(spec: FigureSpec):
    cols = load_csv(spec.inputs["scan"], ("T", "statistic", "se"))
    T, stat = cols["T"], cols["statistic"]
    fig, ax = plt.subplots()
    ax.loglog(T, stat, "o-", label="measured scale")
    slope = spec.overlays.get("predicted_slope")
    if slope is not None:
        ref = stat[0] * (T / T[0]) ** float(slope)
        ax.loglog(T, ref, "k--", label=f"predicted slope {float(slope):g}")
    fitted = spec.overlays.get("fitted_slope")
    title = "self-similarity scaling"
    if fitted is not None:
        title += f" (fitted {float(fitted):.3f})"
    ax.set_xlabel("T")
    ax.set_ylabel("scale statistic")
    ax.set_title(title)
    ax.legend()
    return _save(fig, spec)


def render_covariance(spec: FigureSpec):
    cols = load_csv(spec.inputs["cov"], ("s", "t", "corr", "oracle_corr"))
    s_vals = np.unique(cols["s"])
    n = s_vals.size
    emp = np.full((n, n), np.nan)
    ora = np.full((n, n), np.nan)
    for sv, tv, cv, ov in zip(cols["s"], cols["t"], cols["corr"],
                              cols["oracle_corr"]):
        i = np.searchsorted(s_vals, sv)
        j = np.searchsorted(s_vals, tv)
        emp[i, j] = cv
        ora[i, j] = ov
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    for ax, mat, name in ((axes[0], emp, "empirical"),
                          (axes[1], ora, "oracle"),
                          (axes[2], emp - ora, "difference")):
        im = ax.imshow(mat, origin="lower", cmap="viridis")
        ax.set_title(name)
        ax.set_xticks(range(n), [f"{v:g}" for v in s_vals])
        ax.set_yticks(range(n), [f"{v:g}" for v in s_vals])
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.suptitle("correlation of the rescaled occupation fluctuation")
    return _save(fig, spec)


def render_extinction(spec: FigureSpec):
    cols = load_csv(spec.inputs["scan"], ("horizon", "extinct_fraction"))
    fig, ax = plt.subplots()
    ax.semilogx(cols["horizon"], cols["extinct_fraction"], "o-",
                label="extinct fraction")
    ax.set_xlabel("horizon")
    ax.set_ylabel("fraction extinct before horizon")
    ax.set_ylim(-0.02, 1.02)
    if "mean_ball_occupation" in cols:
        ax2 = ax.twinx()
        ax2.semilogx(cols["horizon"], cols["mean_ball_occupation"], "s--",
                     color="tab:red", label="mean occupation")
        ax2.set_ylabel("mean ball occupation")
        ax2.grid(False)
    ax.set_title("local extinction scan")
    return _save(fig, spec)


def render_lrd_decay(spec: FigureSpec):
    cols = load_csv(spec.inputs["scan"], ("T", "D_T"))
    T, D = cols["T"], cols["D_T"]
    fig, ax = plt.subplots()
    ax.loglog(T, D, "o-", label="distance D_T")
    kappa = spec.overlays.get("kappa_predicted")
    if kappa is not None:
        ref = D[0] * (T / T[0]) ** (-float(kappa))
        ax.loglog(T, ref, "k--",
                  label=f"reference slope -{float(kappa):g}")
    k_hat = spec.overlays.get("kappa_hat")
    title = "long-range dependence decay"
    if k_hat is not None:
        title += f" (fitted {float(k_hat):.3f})"
    ax.set_xlabel("T")
    ax.set_ylabel("D_T")
    ax.set_title(title)
    ax.legend()
    return _save(fig, spec)


def render_limit_paths(spec: FigureSpec):
    cols = load_csv(spec.inputs["paths"], ("t", "path_id", "value"))
    fig, ax = plt.subplots()
    ids = np.unique(cols["path_id"])
    shown = ids[: int(spec.overlays.get("max_paths", 40))]
    for pid in shown:
        m = cols["path_id"] == pid
        order = np.argsort(cols["t"][m])
        ax.plot(cols["t"][m][order], cols["value"][m][order],
                lw=0.7, alpha=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    name = spec.overlays.get("process", "limit process")
    ax.set_title(f"sampled {name} paths (n = {shown.size})")
    return _save(fig, spec)


def render_laplace_validation(spec: FigureSpec):
    cols = load_csv(spec.inputs["rows"],
                    ("mc_mean", "mc_se", "solver_value", "z_score"))
    n = cols["mc_mean"].size
    x = np.arange(n)
    fig, ax = plt.subplots()
    ax.errorbar(x, cols["mc_mean"], yerr=3 * cols["mc_se"], fmt="o",
                capsize=4, label="Monte Carlo (3 s.e.)")
    ax.plot(x, cols["solver_value"], "k_", ms=22, label="mild-equation solver")
    for i in range(n):
        ax.annotate(f"z={cols['z_score'][i]:+.2f}",
                    (x[i], cols["mc_mean"][i]),
                    textcoords="offset points", xytext=(6, 8), fontsize=8)
    ax.set_xticks(x, [f"cfg {i}" for i in x])
    ax.set_ylabel("E exp(-occupation)")
    ax.set_title("Laplace functional: Monte Carlo vs exact solver")
    ax.legend()
    return _save(fig, spec)


_RENDERERS = {
    "regime-atlas": render_regime_atlas,
    "scaling-fit": render_scaling_fit,
    "covariance": render_covariance,
    "extinction": render_extinction,
    "lrd-decay": render_lrd_decay,
    "limit-paths": render_limit_paths,
    "laplace-validation": render_laplace_validation,
}


def render(spec: FigureSpec) -> Path:
    with plt.rc_context(_STYLE):
        return _RENDERERS[spec.kind](spec)


def spec_from_file(path) -> FigureSpec:
    doc = json.loads(Path(path).read_text())
    unknown = set(doc) - {"kind", "inputs", "output", "overlays"}
    if unknown:
        raise SchemaError(f"unknown figure-spec keys: {sorted(unknown)}")
    return FigureSpec(doc["kind"], doc.get("inputs", {}), doc["output"],
                      doc.get("overlays", {}))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="occufluct-plots")
    ap.add_argument("--spec", required=True, help="figure spec JSON")
    args = ap.parse_args(argv)
    try:
        out = render(spec_from_file(args.spec))
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
