"""Concatenator design, the resolution floor, and the converter loops.

The lead-lag concatenators are the heart of the controller: unity gain at
transient frequencies (deviations compared raw, pooling inertia) and
band-ratio gain at DC (relative loadings compared, sharing by capacity).
Their cutoff cannot be pushed arbitrarily low on fixed-width hardware.
"""

import math

from hmg.config import reference_config
from hmg.gecm import bode_export
from hmg.ilc import concatenator_tf, design_omegas, ilc_equivalent_impedances, min_cutoff

cfg = reference_config()
cspec = design_omegas(cfg.omega_0, *cfg.specs)

print("channel corner frequencies (rad/s):")
for name in ("ac", "dc", "ds"):
    print(f"  omega_{name} = {cspec.omega(name):.6f}"
          f"  (DC gain {cspec.omega(name) / cspec.omega_0:.1f})")

bound = min_cutoff(cfg.ilc.sampling_period, cfg.ilc.safety_factor_m)
print(f"\nresolution floor for omega_0: {bound:.6g} rad/s"
      f" = {bound / math.pi:.4g}*pi")
print(f"configured omega_0: {cfg.omega_0:.6g} rad/s ->",
      "ok" if cfg.omega_0 >= bound else "TOO LOW")

print("\nAC concatenator frequency response:")
for w, mag_db, phase in bode_export(concatenator_tf(cspec, "ac"),
                                    [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0]):
    print(f"  w={w:8.4g} rad/s  {mag_db:7.3f} dB  {phase:7.2f} deg")

z1, z2 = ilc_equivalent_impedances(cfg.ilc)
from hmg.lti import tf_eval

print("\ncoupling impedance of the storage->DC loop:")
for w in (0.1, 10.0, 1000.0):
    print(f"  |Z(j{w:g})| = {abs(tf_eval(z1, 1j * w)):.3e}")
print("  (vanishes at DC: ideal steady coupling; 1/k_tp at high frequency)")
