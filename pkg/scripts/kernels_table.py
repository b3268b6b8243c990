"""Error-kernel integrals of both families over their tau ranges."""
import numpy as np

from splitkit.quadrature import kernel_integral, optimal_tau_F

print(f"optimal tau (F): {optimal_tau_F():.17g}")
print(f"{'tau':>6} {'int K_F':>12} {'int K_D':>12}")
for tau in np.linspace(0, 1, 21):
    kf = f"{kernel_integral('F', tau):12.6f}" if tau <= 0.5 else f"{'':>12}"
    print(f"{tau:6.2f} {kf} {kernel_integral('D', tau):12.6f}")
