"""
Checking the mean-field models against exact ones
=================================================

Every reduced model here is a mean-field approximation of something that
can be solved exactly for small systems.  This script runs those
comparisons: exact symmetric-subspace (Dicke) evolution against the Bloch
flow, full density-matrix Lindblad evolution of a few sites against the
per-site mean-field equations, and an explicit cavity mode against its
adiabatic elimination.  The same suite backs ``cavity-xy oracle-check``.
"""

# %%
# Mean field becomes exact as N grows
# -----------------------------------
# Quantum fluctuations about the Bloch vector scale like 1/sqrt(N) at
# first, so the deviation over one interaction period should roughly halve
# for each factor of four in N.

from cavity_xy.checks import check_dicke_convergence, run_oracle_checks

Ns = (20, 50, 100, 200)
for r in (0.3, 0.7):
    devs = check_dicke_convergence(r, Ns)
    print(f"Omega/chiN = {r}: " + ", ".join(f"N={n}: {d:.4f}" for n, d in zip(Ns, devs)))

# %%
# The full suite
# --------------

for c in run_oracle_checks():
    flag = "ok  " if c["passed"] else "FAIL"
    print(f"{flag} {c['name']:<36} {c['value']:.3g}  (bound {c['bound']:.3g})")
