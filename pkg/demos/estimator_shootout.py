"""NMSE-versus-SNR comparison of all estimators against both bounds.

A trimmed version of the 'fig4' preset (fewer trials so it runs in well
under a minute); writes the CSV, a gnuplot script and a PNG into
demos/out/.
"""

import os
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from chanest import emit_csv, emit_gnuplot, preset_config, run_experiment, summarize

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

config = replace(preset_config("fig4"), trials=40,
                 estimators=("lse", "lse_smp", "genie_lse", "lasso"))
records = run_experiment(config, workers=os.cpu_count() or 1)

csv_path = os.path.join(OUT, "shootout.csv")
emit_csv(records, csv_path)
emit_gnuplot(records, csv_path, os.path.join(OUT, "shootout.gp"))
print(summarize(records))

# final-iteration curve per estimator
finals = {}
for r in records:
    key = (r.estimator, r.snr_db)
    if key not in finals or r.turbo_iteration > finals[key].turbo_iteration:
        finals[key] = r

snrs = sorted({r.snr_db for r in records})
style = {"lse": "s-", "lasso": "^-", "genie_lse": "v-", "lse_smp": "o-",
         "crlb_lse": "k--", "crlb_lse_smp": "k:"}
plt.figure(figsize=(7, 5))
for name, fmt in style.items():
    curve = [10 * np.log10(finals[(name, s)].nmse_mean) for s in snrs]
    plt.plot(snrs, curve, fmt, label=name)
plt.xlabel("SNR (dB)")
plt.ylabel("NMSE (dB)")
plt.title(f"32x64 system, sparsity ratio {config.sparsity_ratios[0]:g}")
plt.grid(True)
plt.legend()
png = os.path.join(OUT, "shootout.png")
plt.savefig(png, dpi=120, bbox_inches="tight")
print(f"wrote {csv_path}, {png}")
