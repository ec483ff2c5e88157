"""Two-stage interlinking-converter controller with dynamic concatenators.

The converter routes power between the three subgrids so that

* during transients the concatenated deviations track each other, pooling
  the subgrids' inertia against any local disturbance, and
* in steady state the same loop equalizes relative loading indices, which
  yields capacity-proportional global power sharing.

Both behaviors come from one controller: each per-unit deviation passes
through a lead-lag concatenator (s + w_x)/(s + w_0) whose high-frequency
gain is unity (transient: raw deviations compared) and whose DC gain is
x_max/(x_max - x_min) (steady state: relative loading compared). No mode
switch exists anywhere.

The cutoff w_0 must respect the resolution of the fixed-width arithmetic the
controller is deployed on: discretized with period T_s, the filter pole maps
to exp(-w_0*T_s) ~ 1 - w_0*T_s, so w_0*T_s has to stay above the effective
machine spacing M * 2**-23 of single-precision hardware.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lti import RationalTF, StateSpace, tf
from .subgrid import AC, DC, DS, DegenerateLimits, SubgridSpec

# Single-precision machine spacing of the target fixed-width hardware
# (1 sign bit, 8 exponent bits, 23 fraction bits).
EPS_MACH = 2.0 ** -23


class IlcError(Exception):
    pass


@dataclass(frozen=True)
class ConcatenatorSpec:
    """Cutoff and per-channel corner frequencies of the concatenators."""

    omega_0: float
    omega_ac: float
    omega_dc: float
    omega_ds: float

    def omega(self, channel: str) -> float:
        return {AC: self.omega_ac, DC: self.omega_dc, DS: self.omega_ds}[channel]


@dataclass(frozen=True)
class IlcSpec:
    """Power-loop PI gains and controller deployment parameters."""

    k_tp1: float = 4000.0
    k_ti1: float = 400e3
    k_tp2: float = 4000.0
    k_ti2: float = 400e3
    sampling_period: float = 50e-6
    safety_factor_m: float = 1.3

    def validate(self) -> None:
        for name in ("k_tp1", "k_ti1", "k_tp2", "k_ti2", "sampling_period",
                     "safety_factor_m"):
            if getattr(self, name) <= 0.0:
                raise IlcError(f"{name} must be > 0")


@dataclass
class IlcState:
    """Mutable controller state for one run.

    Filter states are the internal concatenator integrators; z1/z2 are the
    power-loop PI integrators. p1_w > 0 moves power DS -> DC, p2_w > 0
    moves power DS -> AC.
    """

    z_ac: float = 0.0
    z_dc: float = 0.0
    z_ds: float = 0.0
    z1: float = 0.0
    z2: float = 0.0
    p1_w: float = 0.0
    p2_w: float = 0.0


def min_cutoff(sampling_period: float, safety_factor: float) -> float:
    """Smallest admissible concatenator cutoff, M * 2**-23 / T_s [rad/s]."""
    if sampling_period <= 0.0 or safety_factor <= 0.0:
        raise IlcError("sampling period and safety factor must be > 0")
    return safety_factor * EPS_MACH / sampling_period


def design_omegas(
    omega_0: float, ac: SubgridSpec, dc: SubgridSpec, ds: SubgridSpec
) -> ConcatenatorSpec:
    """Corner frequencies w_x = w_0 * x_max / (x_max - x_min) per channel."""
    if omega_0 <= 0.0:
        raise IlcError("omega_0 must be > 0")
    omegas = {}
    for spec in (ac, dc, ds):
        if spec.band == 0.0:
            raise DegenerateLimits(f"{spec.kind}: x_max == x_min")
        omegas[spec.kind] = omega_0 * spec.x_max / spec.band
    return ConcatenatorSpec(
        omega_0=omega_0, omega_ac=omegas[AC], omega_dc=omegas[DC],
        omega_ds=omegas[DS],
    )


def concatenator_tf(cspec: ConcatenatorSpec, channel: str) -> RationalTF:
    """(s + w_x)/(s + w_0) for the requested channel."""
    return tf([cspec.omega(channel), 1.0], [cspec.omega_0, 1.0])


def concatenator_ss(cspec: ConcatenatorSpec, channel: str) -> StateSpace:
    """State-space form y = u + (w_x - w_0) z, dz/dt = u - w_0 z."""
    w_x, w_0 = cspec.omega(channel), cspec.omega_0
    return StateSpace(
        A=np.array([[-w_0]]), B=np.ones(1), C=np.array([w_x - w_0]), D=1.0
    )


def ilc_equivalent_impedances(spec: IlcSpec) -> tuple[RationalTF, RationalTF]:
    """Coupling impedances of the two power loops, s/(k_tp s + k_ti)."""
    spec.validate()
    z1 = tf([0.0, 1.0], [spec.k_ti1, spec.k_tp1])
    z2 = tf([0.0, 1.0], [spec.k_ti2, spec.k_tp2])
    return z1, z2


def ilc_outputs(
    state: IlcState,
    delta_f_pu: float,
    delta_vdc_pu: float,
    delta_vds_pu: float,
    spec: IlcSpec,
    cspec: ConcatenatorSpec | None,
    p_gmax_w: float,
) -> tuple[float, float, float, float, float]:
    """Concatenated deviations and converter powers from the current state.

    With cspec None the concatenators are bypassed (unity filters), which
    reduces the controller to pure transient inertia transfer.
    """
    if cspec is None:
        c_ac, c_dc, c_ds = delta_f_pu, delta_vdc_pu, delta_vds_pu
    else:
        w0 = cspec.omega_0
        c_ac = delta_f_pu + (cspec.omega_ac - w0) * state.z_ac
        c_dc = delta_vdc_pu + (cspec.omega_dc - w0) * state.z_dc
        c_ds = delta_vds_pu + (cspec.omega_ds - w0) * state.z_ds
    e1 = c_ds - c_dc
    e2 = c_ds - c_ac
    p1_w = (spec.k_tp1 * e1 + spec.k_ti1 * state.z1) * p_gmax_w
    p2_w = (spec.k_tp2 * e2 + spec.k_ti2 * state.z2) * p_gmax_w
    return c_ac, c_dc, c_ds, p1_w, p2_w


def ilc_step(
    state: IlcState,
    delta_f_pu: float,
    delta_vdc_pu: float,
    delta_vds_pu: float,
    spec: IlcSpec,
    cspec: ConcatenatorSpec | None,
    h: float,
    p_gmax_w: float,
) -> IlcState:
    """Advance the controller one step with deviation inputs held constant.

    Converter powers stored in the returned state are the values acting over
    this step (computed from the pre-advance state); p1 drives the DS->DC
    stage, p2 the DS->AC stage, in watts on the global base.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    c_ac, c_dc, c_ds, p1_w, p2_w = ilc_outputs(
        state, delta_f_pu, delta_vdc_pu, delta_vds_pu, spec, cspec, p_gmax_w
    )
    out = replace(state, p1_w=p1_w, p2_w=p2_w)
    out.z1 = state.z1 + h * (c_ds - c_dc)
    out.z2 = state.z2 + h * (c_ds - c_ac)
    if cspec is not None:
        # RK4 one-step map of dz/dt = u - w0 z with held input
        m, n = _filter_maps(cspec.omega_0, h)
        for name, u in (("z_ac", delta_f_pu), ("z_dc", delta_vdc_pu),
                        ("z_ds", delta_vds_pu)):
            setattr(out, name, m * getattr(state, name) + n * u)
    return out


def _filter_maps(w0: float, h: float) -> tuple[float, float]:
    a = -w0 * h
    m = 1.0 + a + a * a / 2.0 + a ** 3 / 6.0 + a ** 4 / 24.0
    n = h * (1.0 + a / 2.0 + a * a / 6.0 + a ** 3 / 24.0)
    return m, n
