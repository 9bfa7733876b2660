"""
Two coupled axes
================

Each axis sees the other one through a delayed cross term. Inverting the
diagonal only ignores the interaction and the learning diverges; inverting
the full 2x2 process sensitivity converges in one step.
"""

# %%
import numpy as np

from ilcbench import (
    NoncausalFilter,
    TransferFunction,
    check_convergence_mimo,
    coupled_printer_scenario,
    default_grid,
    design_inverse_L,
    freq_response,
    printer_reference,
    run_ilc_mimo,
)

c = 1.2
cs = coupled_printer_scenario(coupling=c)
ts = cs.ts
frf = freq_response([list(row) for row in cs.PS], default_grid(ts))
I = NoncausalFilter.identity(ts)
r = (printer_reference(0.1).position, printer_reference(0.05).position)

# %%
Ld = design_inverse_L(cs.PS[0][0], 200)
dec = [[Ld, None], [None, Ld]]
rep = check_convergence_mimo(frf, dec, I)
h = run_ilc_mimo(cs, r, dec, I, n_iter=10)
print(f"decentralised: sup sigma = {rep.sup_rho:.2f}")
print("  ||e_j||:", np.array2string(h.e_norms, formatter={"float": "{:.1e}".format}))

# %%
# PS = ps [[1, c q], [c q, 1]], so PS^-1 = ps^-1 (1 - c^2 q^2)^-1 [[1, -c q], [-c q, 1]]
base = Ld.compose(design_inverse_L(TransferFunction([1.0, 0.0, -c * c], [1.0], ts), 200))
cross = base.compose(NoncausalFilter.shift(1, ts, -c))
full = [[base, cross], [cross, base]]
rep = check_convergence_mimo(frf, full, I)
h = run_ilc_mimo(cs, r, full, I, n_iter=5)
print(f"full inverse: sup sigma = {rep.sup_rho:.1e}")
print("  ||e_j||:", np.array2string(h.e_norms, formatter={"float": "{:.1e}".format}))
