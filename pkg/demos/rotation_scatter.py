"""Scatter data for the rotate-then-fit story.

The regression slope through estimated effects is pulled toward the
noise axis. Whitening the scatter by the inverse square root of the
noise shape makes the smallest-direction fit land on its target no
matter how small the experiments are, while the plain regression slope
only gets there as n grows. This script writes the scatter plus the
reference slopes as CSV files next to itself so any plotting tool can
draw the two panels.
"""
import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from proxycov import (
    aggregate_unit_data,
    reference_slopes,
    scenario_preset,
    simulate_panel,
    structural_truth_covariance,
    symmetric_inverse_sqrt,
)

out_dir = Path(__file__).resolve().parent
sc = replace(scenario_preset("appendix-figure-setup"), seed=7)
truth = structural_truth_covariance(sc)

units, effects = simulate_panel(sc, 0)
aggs = aggregate_unit_data(units)
est = np.array([a.effect_estimate for a in aggs])
whitener = symmetric_inverse_sqrt(sc.noise.omega)
rotated = est @ whitener

with open(out_dir / "scatter_raw_vs_rotated.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["effect_Y", "effect_S1", "rotated_Y", "rotated_S1"])
    for row, rot in zip(est, rotated):
        w.writerow([*row, *rot])

slopes = reference_slopes(truth, sc.noise, [100, 10000])
with open(out_dir / "scatter_reference_slopes.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["line", "slope"])
    w.writerow(["ols_target", slopes["ols_target"][0]])
    w.writerow(["tls_target", slopes["tls_target"][0]])
    w.writerow(["whitened_ols_target", slopes["whitened_ols_target"][0]])
    for rec in slopes["by_n"]:
        w.writerow([f"ols_plim_n{rec['n']}", rec["ols_plim"][0]])
        w.writerow([f"tls_plim_n{rec['n']}", rec["tls_plim"][0]])
        w.writerow([f"whitened_ols_plim_n{rec['n']}", rec["whitened_ols_plim"][0]])

print("wrote", out_dir / "scatter_raw_vs_rotated.csv")
print("wrote", out_dir / "scatter_reference_slopes.csv")

gap100 = abs(slopes["by_n"][0]["whitened_ols_plim"][0] - slopes["whitened_ols_target"][0])
gap10k = abs(slopes["by_n"][1]["whitened_ols_plim"][0] - slopes["whitened_ols_target"][0])
tlsgap = max(
    abs(rec["tls_plim"][0] - slopes["tls_target"][0]) for rec in slopes["by_n"]
)
print(f"whitened regression slope gap: {gap100:.4f} at n=100, {gap10k:.4f} at n=10000")
print(f"smallest-direction slope gap:  {tlsgap:.1e} at every n (noise shifts all")
print("eigenvalues of the whitened matrix equally, so the direction never moves)")
