"""
Virtual printer and the repeatable part of its error
====================================================

Builds the canonical printer loop, runs ten tasks without feedforward and
splits the errors into the sample mean (what learning can remove) and the
task-to-task residuals (what it cannot).
"""

# %%
import numpy as np
from scipy.signal import find_peaks

from ilcbench import (
    collect_ensemble,
    decompose,
    default_grid,
    default_printer_scenario,
    freq_response,
    performance_bound,
    printer_reference,
)

sc = default_printer_scenario()
prof = printer_reference()
r = prof.position
print(f"Ts = {sc.ts} s, record of {len(r)} samples, move of {prof.n_move} samples")
print(f"peak velocity {np.max(prof.velocity.samples):.3f} m/s, "
      f"peak acceleration {np.max(prof.acceleration.samples):.3f} m/s^2")

# %%
# The process sensitivity GS shows the belt resonance above the servo bandwidth.
grid = default_grid(sc.ts, 2000)
mag = np.abs(freq_response(sc.PS, grid).siso)
peaks, _ = find_peaks(20 * np.log10(mag), prominence=3.0)
for k in peaks:
    print(f"|GS| resonance near {grid[k] / 2 / np.pi:.1f} Hz")

# %%
# Ten tasks with f = 0: the errors are nearly identical.
ens = collect_ensemble(sc, r, n_exp=10)
m, res = decompose(ens)
rep = performance_bound(ens)
print(f"||m_e||_2 = {rep.mean_norm:.3e} m")
print(f"rms of ||e_j - m_e||_2 = {rep.residual_rms:.3e} m")
print(f"predicted ILC improvement factor: {rep.improvement_factor:.0f}x")
