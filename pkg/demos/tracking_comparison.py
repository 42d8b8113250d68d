"""Nonlinearity of three tracking measurement models across prior spreads.

Three classic measurement maps of a 2D constant-velocity target state:

    bot     bearing only (scalar atan2, east-of-north)
    gmti    slant range, bearing, and range rate from an elevated sensor
    rdcos   range and direction cosine

For each, the unitless measures (diag and full weights) and the classic
normalized measure are swept over the prior spread factor.  For the
scalar BOT output everything coincides; for the vector outputs the
classic measure depends on the reporting units (gmti in [m, rad, m/s] vs
[km, deg, km/h]) while the weighted measures do not.

Run:  python demos/tracking_comparison.py
"""

import pathlib

import numpy as np

from nlmeasure import Measure, SweepConfig, run_sweep

HERE = pathlib.Path(__file__).parent
OUT = HERE / "output"
SAMPLES = 200_000
SEED = 11


def sweep():
    config = SweepConfig(
        models=[
            ("bot", "native"),
            ("gmti", "native"),
            ("gmti", "km_deg_kmh"),
            ("rdcos", "native"),
            ("rdcos", "km"),
        ],
        alpha_start=1e-1,
        alpha_stop=1e1,
        alpha_points=15,
        measures=[Measure.parse(t) for t in ("orig_normalized", "diag", "full")],
        n_samples=SAMPLES,
        seed=SEED,
    )
    OUT.mkdir(exist_ok=True)
    csv_path = OUT / "tracking_comparison.csv"
    records = run_sweep(config, out_path=str(csv_path))
    print(f"wrote {len(records)} rows to {csv_path}")
    return records


def summarize(records):
    def value(model, variant, measure, alpha_pos):
        rows = sorted(
            (r for r in records if (r.model, r.variant, r.measure) == (model, variant, measure)),
            key=lambda r: r.alpha,
        )
        return rows[alpha_pos].value

    mid = 7  # alpha = 1 on the 15-point grid
    print("\nat alpha = 1:")
    print(f"  bot: classic = diag = full = {value('bot', 'native', 'full', mid):.4f} (scalar output)")
    for model in ("gmti", "rdcos"):
        native = value(model, "native", "orig_normalized", mid)
        alt_variant = "km_deg_kmh" if model == "gmti" else "km"
        alt = value(model, alt_variant, "orig_normalized", mid)
        full_native = value(model, "native", "full", mid)
        full_alt = value(model, alt_variant, "full", mid)
        print(
            f"  {model}: classic {native:.4f} (native) vs {alt:.4f} ({alt_variant}); "
            f"full weight {full_native:.6f} vs {full_alt:.6f} (unit-stable)"
        )


def plot(records):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("(matplotlib not available; skipping the figure)")
        return
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.8), sharey=True)
    for ax, model in zip(axes, ("bot", "gmti", "rdcos")):
        for measure, style in (("full", "C2-"), ("diag", "C3--"), ("orig_normalized", "C0:")):
            rows = sorted(
                (r for r in records if (r.model, r.variant, r.measure) == (model, "native", measure)),
                key=lambda r: r.alpha,
            )
            ax.plot([r.alpha for r in rows], [r.value for r in rows], style, label=measure)
        variant = {"gmti": "km_deg_kmh", "rdcos": "km"}.get(model)
        if variant:
            rows = sorted(
                (r for r in records if (r.model, r.variant, r.measure) == (model, variant, "orig_normalized")),
                key=lambda r: r.alpha,
            )
            ax.plot([r.alpha for r in rows], [r.value for r in rows], "C0-.",
                    label=f"orig_normalized ({variant})")
        ax.set_xscale("log")
        ax.set_title(model)
        ax.set_xlabel("alpha")
        ax.legend(fontsize=7)
    axes[0].set_ylabel("measure of nonlinearity")
    fig.tight_layout()
    png = OUT / "tracking_comparison.png"
    fig.savefig(png, dpi=130)
    print(f"figure saved to {png}")


if __name__ == "__main__":
    records = sweep()
    summarize(records)
    plot(records)
