"""
Changing the reference
======================

Signal-based ILC learns a feedforward for one particular reference. After
a switch to a longer move its error jumps to S (r_b - r_a). Basis-function
ILC learns coefficients of reference derivatives instead, which carry over.
"""

# %%
import numpy as np

from ilcbench import (
    BasisSpec,
    NoncausalFilter,
    default_printer_scenario,
    demonstrate_reference_change,
    design_inverse_L,
    lifted_matrix,
    printer_reference,
)

sc = default_printer_scenario().noise_free()
ra, rb = printer_reference(0.10), printer_reference(0.15)
L = design_inverse_L(sc.PS, 200)
spec = BasisSpec(("acceleration", "jerk", "snap"))
J = lifted_matrix(sc.PS, len(ra.position))

rep = demonstrate_reference_change(sc, ra, rb, L, NoncausalFilter.identity(sc.ts), spec, J,
                                   n_tasks=14, switch_task=7)

# %%
print(" task  feedback    signal ILC  basis ILC")
for j, (a, b, c) in enumerate(zip(rep.feedback, rep.signal_ilc, rep.basis_ilc)):
    mark = "  <- switch" if j == rep.switch_task else ""
    print(f"{j:5d}  {a:.3e}  {b:.3e}  {c:.3e}{mark}")
print("learned coefficients (acc, jerk, snap):", np.array2string(rep.thetas[-1], precision=5))
