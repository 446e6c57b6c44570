# %% [markdown]
# # How many parameters does the Tucker-reduced LSTM save?
#
# One LSTM per series costs `4 d'(d + d' + 1)` weights per series. The
# tensor LSTM shares its gate weights across the whole grid. It pays
# instead for small per-mode matrices on a core of size `ceil(rho * N_m)`
# and for the factor matrices that map between the grid and the core.

# %%
from net3.cli import param_report
from net3.trnn import count_params_mlstm, count_params_tlstm, rho_upper_bound

shapes = {
    "Motes": ((54, 4), 0.8),
    "Soil": ((42, 5, 2), 0.8),
    "Revenue": ((410, 3), 0.2),
    "Traffic": ((1000, 2), 0.1),
    "20CR": ((30, 30, 20, 6), 0.9),
}

print(f"{'dataset':<9}{'tensor':>12}{'per-series':>14}{'saved':>9}{'rho_max':>10}")
for name, (dims, rho) in shapes.items():
    rep = param_report(dims, rho, 8, 8)
    print(f"{name:<9}{rep['tlstm']:>12,}{rep['mlstm']:>14,}{rep['reduction_pct']:>8.2f}%{rep['rho_max']:>10.3f}")

# %% [markdown]
# The bound `rho_max` assumes the core has exactly `rho * N_m` nodes.
# Rounding the core size up can tip a case just under the bound over it.

# %%
dims, rho = (9,), 0.62
print("bound", round(rho_upper_bound(dims, 2, 2), 4))
print("tensor", count_params_tlstm(dims, rho, 2, 2), "vs per-series", count_params_mlstm(dims, 2, 2))

# %% [markdown]
# The count grows roughly quadratically in `rho` because of the `N'^2` gate
# matrices, while the per-series cost does not depend on `rho` at all.

# %%
for r in (0.1, 0.2, 0.4, 0.8, 1.0):
    print(r, count_params_tlstm((54, 4), r, 8, 8))
