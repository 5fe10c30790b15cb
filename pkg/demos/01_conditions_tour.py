"""Tour of the condition functionals on three triangular arrays.

Evaluates the classical quantities (Lindeberg, Lyapunov, Feller,
infinitesimality, Rotar) on an iid row, on the all-normal mixing array,
and on a rare-jump array, then checks the implication ordering that the
numbers obey on every row.
"""

import randsum as rs


def show(label, array, n, eps=0.5, delta=1.0):
    L = rs.lindeberg(array, n, eps)
    Lam = rs.lyapunov(array, n, delta)
    F = rs.feller(array, n)
    I = rs.infinitesimality(array, n, eps)
    R = rs.rotar(array, n, eps)
    print(f"{label:20s} n={n:3d}  L={L:8.5f}  Lyap={Lam:8.5f}  "
          f"F={F:8.5f}  I={I:8.5f}  R={R:8.5f}")
    # the chain: Lyapunov dominates Lindeberg, Lindeberg bounds Feller,
    # Chebyshev bounds infinitesimality by Feller
    assert L <= eps ** (-delta) * Lam + 1e-9
    assert F <= eps * eps + L + 1e-9
    assert I <= F / (eps * eps) + 1e-9


uniform = rs.array_from_config(
    {"array": "iid", "base": {"family": "uniform", "low": -1.0, "high": 1.0}}
)
shiryaev = rs.make_shiryaev_array()
rare = rs.array_from_config({"array": "rare-jump"})

for n in (4, 16, 64, 256):
    show("iid uniform", uniform, n)
print()
for n in (4, 16, 64, 256):
    show("all-normal mixing", shiryaev, n)
print()
for n in (4, 16, 64, 256):
    show("rare jump", rare, n)

print()
print("iid uniform: everything vanishes, the classical CLT regime.")
print("all-normal mixing: Feller stays at 1/2 and Lindeberg stays large,")
print("  yet every row sum is exactly standard normal (Rotar is 0).")
print("rare jump: Feller vanishes but Lindeberg tends to 1; the variance")
print("  escapes through a vanishing-probability jump.")
