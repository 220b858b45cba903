"""Print rho1 / rho2 and a few closed-form transforms over an alpha grid"""
import sys
from pathlib import Path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import math

from services.mittag_leffler import LimitLawSpec, exit_two_sided, laplace_tau_sharp, laplace_xi, rho1, rho2
from utils import SinaiLabError

ALPHAS = [1.1, 1.25, 1.5, 1.75, 1.9, 2.0]
Q = 1.0

print("=" * 80)
print("K# ROOT TABLE")
print("=" * 80)
print(f"{'alpha':>6} {'rho1':>16} {'rho2':>16} {'E e^-q tau# (npj)':>20} {'E e^-q Xi (npj)':>18} {'p_exit_low':>12}")

for alpha in ALPHAS:
    try:
        spec = LimitLawSpec(alpha, 'NoPositiveJumps')
        r1, r2 = rho1(alpha), rho2(alpha)
        tau = laplace_tau_sharp(spec, Q)
        xi = laplace_xi(spec, Q)
        exit_low = exit_two_sided(alpha, Q, 0.5).p_exit_low
        print(f"{alpha:>6.2f} {r1:>16.12f} {r2:>16.12f} {tau:>20.10f} {xi:>18.10f} {exit_low:>12.6f}")
    except SinaiLabError as e:
        print(f"{alpha:>6.2f} error: {e}")

print(f"\npi^2/4 = {math.pi ** 2 / 4:.12f}")
print("=" * 80)
