"""The Zolotarev ideal metric of integer order.

zeta_s integrates the s-th derivative mismatch of smoothed CDFs; the
three properties that make it "ideal" are checked numerically here:
homogeneity of degree s under scaling, semi-additivity over
convolutions, and the sandwich between the smooth-test-function lower
bound and the metric itself.
"""

import randsum as rs
from randsum import Normal, Rademacher, SumLaw, scale

rad = Rademacher()
phi = Normal(0.0, 1.0)

print("order   zeta_s(Rademacher, Phi)")
for s in (1, 2, 3):
    est = rs.zeta(rad, phi, s)
    print(f"  s={s}   {est.value:.12f}  (+/- {est.bound:.1e})")

# degree-s homogeneity: zeta_s(cX, cY) = |c|^s zeta_s(X, Y)
base = rs.zeta(rad, phi, 2).value
for c in (0.5, 2.0, -3.0):
    scaled = rs.zeta(scale(rad, c), scale(phi, c), 2).value
    print(f"scale c={c:+.1f}:  zeta_2 ratio {scaled / base:10.6f}  expect {c * c:.6f}")

# semi-additivity: the metric of a convolution is at most the sum of
# the componentwise metrics
checks = rs.semi_additivity_check(
    [SumLaw([-0.5, 0.5], [0.5, 0.5]), SumLaw([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])],
    [Normal(0.0, 0.25), Normal(0.0, 0.5)],
    s_values=(1, 2),
)
print()
for chk in checks:
    print(f"{chk.name}: {chk.lhs:.6f} <= {chk.rhs:.6f}  ok={chk.ok}")

# the lower bound uses one smooth test function; it can never exceed zeta
lo = rs.zeta_lower_bound(rad, phi, 2)
print(f"\ntest-function lower bound {lo.value:.6f} <= zeta_2 {base:.6f}")
