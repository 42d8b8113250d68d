"""How output units distort the classic MSE-based nonlinearity measure.

A Gaussian position in Cartesian coordinates is pushed through the polar
conversion [range, bearing].  The two variants below differ ONLY in the
bearing unit (radians vs degrees), yet the classic normalized measure
M / sqrt(tr(S_gg)) reports wildly different nonlinearity for them: at a
spread factor alpha = 0.17 it says ~10% for radians and ~80% for degrees.

Scanning the bearing scale over twenty decades traces out the full band of
values the classic measure can be driven to by unit choice alone, while
the weighted measures (diag / full) stay put.  That band is the argument
for unitless weighting.

Run:  python demos/unit_sensitivity.py
"""

import pathlib

import numpy as np

from nlmeasure import (
    Measure,
    SweepConfig,
    builtin_model,
    compute_mon,
    estimate_moments,
    run_sweep,
    weight_full,
    weight_legacy,
)
from nlmeasure.sweep import EnvelopeSpec

HERE = pathlib.Path(__file__).parent
OUT = HERE / "output"
SAMPLES = 200_000
SEED = 7


def headline_numbers():
    print("=== the headline numbers at alpha = 0.17 ===")
    for name in ("cart2polar_rad", "cart2polar_deg"):
        est = estimate_moments(builtin_model(name, 0.17), SAMPLES, SEED)
        legacy = compute_mon(est, weight_legacy(est))
        full = compute_mon(est, weight_full(est))
        print(
            f"  {name:16s} classic normalized = {legacy.value:5.1%}   "
            f"unitless (full weight) = {full.value:5.1%}"
        )
    print("  -> same transformation, same prior; only the bearing unit changed.\n")


def full_sweep():
    print("=== sweep with bearing-unit envelope ===")
    config = SweepConfig(
        models=[("cart2polar_rad", "native"), ("cart2polar_deg", "native")],
        alpha_start=1e-4,
        alpha_stop=1e2,
        alpha_points=25,
        measures=[Measure.parse("orig_normalized"), Measure.parse("full")],
        n_samples=SAMPLES,
        seed=SEED,
        envelope=EnvelopeSpec(
            models=[("cart2polar_rad", "native")],
            component=1,  # bearing
            exp_min=-10.0,
            exp_max=10.0,
            points=61,
        ),
    )
    OUT.mkdir(exist_ok=True)
    csv_path = OUT / "unit_sensitivity.csv"
    records = run_sweep(config, out_path=str(csv_path))
    print(f"  wrote {len(records)} rows to {csv_path}")
    return records


def plot(records):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("  (matplotlib not available; skipping the figure)")
        return

    def series(model, measure):
        rows = [r for r in records if r.model == model and r.measure == measure]
        rows.sort(key=lambda r: r.alpha)
        return [r.alpha for r in rows], [r.value for r in rows]

    fig, ax = plt.subplots(figsize=(7, 4.5))
    a_lo, lo = series("cart2polar_rad", "envelope_min")
    _, hi = series("cart2polar_rad", "envelope_max")
    ax.fill_between(a_lo, lo, hi, alpha=0.15, color="gray",
                    label="classic measure over all bearing units")
    for model, style in (("cart2polar_rad", "C0-o"), ("cart2polar_deg", "C1-s")):
        a, v = series(model, "orig_normalized")
        ax.plot(a, v, style, ms=3, label=f"classic, {model.split('_')[-1]}")
    a, v = series("cart2polar_rad", "full")
    ax.plot(a, v, "C2--", lw=2, label="unitless (full weight)")
    ax.set_xscale("log")
    ax.set_xlabel("prior spread factor alpha")
    ax.set_ylabel("measure of nonlinearity")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="upper left", fontsize=8)
    ax.set_title("Unit sensitivity of the classic measure vs the weighted one")
    fig.tight_layout()
    png = OUT / "unit_sensitivity.png"
    fig.savefig(png, dpi=130)
    print(f"  figure saved to {png}")


if __name__ == "__main__":
    headline_numbers()
    records = full_sweep()
    plot(records)
