import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_ac, make_dc, make_ds
from hmg.gecm import (
    GecmError,
    assemble_admittance,
    bode_export,
    build_branch_impedances,
    build_gecm,
    default_bode_grid,
    global_inertia,
    ideal_global_deviation_tf,
    objective1_only_ratio,
    predict_rates,
    predict_steady_shares,
    restored_absolute_tf,
    solve_nodal,
)
from hmg.ilc import IlcSpec, design_omegas
from hmg.lti import ivt_rate_limit, tf, tf_eval, tf_series
from hmg.subgrid import build_open_loop_tf, steady_droop_gain_pu

W0 = 1e-3 * math.pi
REF_GAINS = dict(k_tp1=4000.0, k_ti1=400e3, k_tp2=4000.0, k_ti2=400e3)


@pytest.fixture
def specs(ac_spec, dc_spec, ds_spec):
    return (ac_spec, dc_spec, ds_spec)


@pytest.fixture
def ref_system(specs):
    cspec = design_omegas(W0, *specs)
    return build_gecm(*specs, IlcSpec(**REF_GAINS), cspec, (12e3, 14e3, 10e3))


# ---------------------------------------------------------------------------
# branch impedances
# ---------------------------------------------------------------------------

def test_branch_scaling_equal_capacities(specs):
    z_ac, z_dc, z_ds = build_branch_impedances(*specs)
    # equal 20 kW capacities scale every branch by 3 vs the local base
    local = build_open_loop_tf(specs[2])
    assert ivt_rate_limit(z_ds) == pytest.approx(0.2, rel=1e-12)
    assert ivt_rate_limit(z_ds) == pytest.approx(-3.0 * ivt_rate_limit(local), rel=1e-12)


def test_branch_scaling_single_subgrid():
    # shrink the other capacities: the branch reduces to the local model
    ac = make_ac()
    dc = make_dc(p_max_w=1e-6)
    ds = make_ds(p_max_w=1e-6)
    z_ac, _, _ = build_branch_impedances(ac, dc, ds)
    assert ivt_rate_limit(z_ac) == pytest.approx(0.25, rel=1e-6)


def test_branch_validation(ref_system):
    ref_system.validate()  # stable, proper branches


# ---------------------------------------------------------------------------
# admittance assembly and nodal solve
# ---------------------------------------------------------------------------

def test_admittance_decouples_without_ilc(specs):
    cspec = design_omegas(W0, *specs)
    weak = IlcSpec(k_tp1=1e-12, k_ti1=1e-12, k_tp2=1e-12, k_ti2=1e-12)
    sys_ = build_gecm(*specs, weak, cspec, (1e3, 1e3, 1e3))
    g = assemble_admittance(sys_)
    s = 1j * 1.0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            entry = g[i][j]
            val = 0.0 if entry.num.is_zero else abs(tf_eval(entry, s))
            assert val < 1e-10 * abs(tf_eval(g[i][i], s))


def test_admittance_unity_concatenators(specs):
    # bypassed concatenators leave pure PI couplings in the off-diagonals
    ilc = IlcSpec(**REF_GAINS)
    sys_ = build_gecm(*specs, ilc, None, (1e3, 1e3, 1e3))
    g = assemble_admittance(sys_)
    s = 1j * 3.0
    coupling = (REF_GAINS["k_tp1"] * s + REF_GAINS["k_ti1"]) / s
    assert tf_eval(g[0][1], s) == pytest.approx(-coupling, rel=1e-10)
    assert tf_eval(g[2][1], s) == pytest.approx(-coupling, rel=1e-10)


def test_solve_zero_loads_zero_deviations(specs):
    cspec = design_omegas(W0, *specs)
    sys_ = build_gecm(*specs, IlcSpec(**REF_GAINS), cspec, (0.0, 0.0, 0.0))
    sol = solve_nodal(sys_)
    for kind in ("ac", "dc", "ds"):
        assert sol.channel(kind).num.is_zero


def test_solve_symmetric_system():
    # identical specs and loads: the three responses coincide
    base = make_ac()
    trio = (base, replace(base, kind="dc"), replace(make_ds(), x_max=51.0,
            x_min=49.0, x_nominal=50.0))
    # build a genuinely symmetric system instead: three AC-like branches
    ac = base
    dc = replace(base, kind="dc")
    ds_like = replace(base, kind="dc")
    from hmg.gecm import GecmSystem
    from hmg.ilc import ilc_equivalent_impedances

    z = build_branch_impedances(ac, dc, dc)[0]
    t = tf([2.0 * W0, 1.0], [W0, 1.0])
    z1, z2 = ilc_equivalent_impedances(IlcSpec(**REF_GAINS))
    sys_ = GecmSystem(
        z_ac=z, z_dc=z, z_ds=z, t_ac=t, t_dc=t, t_ds=t, z_ilc1=z1, z_ilc2=z2,
        p_lac_gpu=0.2, p_ldc_gpu=0.2, p_lds_gpu=0.2, p_gmax_w=60e3,
    )
    sol = solve_nodal(sys_)
    for s in (1j * 0.1, 1j * 10.0, 0.5 + 1j):
        vals = [sol.eval_channel(kind, s) for kind in ("ac", "dc", "ds")]
        assert vals[0] == pytest.approx(vals[1], rel=1e-8)
        assert vals[0] == pytest.approx(vals[2], rel=1e-8)
    del trio


def test_solve_reference_residual_and_stability(ref_system):
    sol = solve_nodal(ref_system)
    assert sol.residual < 1e-6
    poles = sol.poles()
    genuine = poles[np.abs(poles) > 1e-9]
    assert np.all(genuine.real < 0.0)


def test_solve_steady_deviations_match_droop_gains(ref_system, specs):
    # steady state is capacity-proportional sharing through each droop
    sol = solve_nodal(ref_system)
    p_lg_pu = 36e3 / 60e3
    for kind, spec in zip(("ac", "dc", "ds"), specs):
        got = sol.eval_channel(kind, 1e-12).real
        want = steady_droop_gain_pu(spec) * p_lg_pu
        assert got == pytest.approx(want, rel=1e-8)


def test_solve_midband_plateau_shows_global_inertia(ref_system, specs):
    sol = solve_nodal(ref_system)
    want = (36e3 / 60e3) / (2.0 * global_inertia(specs))
    for kind in ("ac", "dc", "ds"):
        for w in (20.0, 50.0, 200.0):
            got = abs(1j * w * sol.eval_channel(kind, 1j * w))
            assert got == pytest.approx(want, rel=0.02)


# ---------------------------------------------------------------------------
# global inertia and predictions
# ---------------------------------------------------------------------------

def test_global_inertia_reference(specs):
    assert global_inertia(specs) == 12.5 / 3.0


def test_global_inertia_doubled_storage(ac_spec, dc_spec):
    specs = (ac_spec, dc_spec, make_ds(y_h=15.0))
    assert global_inertia(specs) == 20.0 / 3.0


def test_global_inertia_single_subgrid(ac_spec):
    specs = (ac_spec, make_dc(p_max_w=1e-9), make_ds(p_max_w=1e-9))
    assert global_inertia(specs) == pytest.approx(2.0, rel=1e-12)


def test_predict_rates_table(specs):
    rocof, rocov_dc, rocov_ds = predict_rates(specs, 36e3)
    assert rocof == pytest.approx(3.672, rel=1e-12)
    assert rocov_dc == pytest.approx(27.36, rel=1e-12)
    assert rocov_ds == pytest.approx(51.12, rel=1e-12)
    specs2 = (specs[0], specs[1], make_ds(y_h=15.0))
    rocof2, rocov_dc2, rocov_ds2 = predict_rates(specs2, 36e3)
    assert rocof2 == pytest.approx(2.295, rel=1e-12)
    assert rocov_dc2 == pytest.approx(17.10, rel=1e-12)
    assert rocov_ds2 == pytest.approx(31.95, rel=1e-12)
    assert predict_rates(specs, 0.0) == (0.0, 0.0, 0.0)


def test_predict_steady_shares(specs):
    assert predict_steady_shares(specs, 36e3) == pytest.approx((12e3,) * 3)
    assert predict_steady_shares(specs, 42e3) == pytest.approx((14e3,) * 3)
    lopsided = (make_ac(p_max_w=40e3), make_dc(p_max_w=10e3), make_ds(p_max_w=10e3))
    assert predict_steady_shares(lopsided, 30e3) == pytest.approx((20e3, 5e3, 5e3))
    # closure: shares sum to the load exactly
    shares = predict_steady_shares(specs, 33.3e3)
    assert sum(shares) == pytest.approx(33.3e3, abs=1e-9)


def test_objective1_only_ratio(specs):
    assert objective1_only_ratio(specs) == pytest.approx((25.5, 38.0, 35.5), rel=1e-12)
    same_band = (make_ac(), make_dc(x_max=380.0, x_min=380.0 * 49 / 51,
                                    x_nominal=375.0), make_ds())
    r = objective1_only_ratio(same_band)
    assert r[0] == pytest.approx(r[1], rel=1e-10)
    widened = objective1_only_ratio((make_ac(x_min=47.0), make_dc(), make_ds()))
    assert widened[0] < 25.5  # wider band lowers the share


# ---------------------------------------------------------------------------
# ideal-coupling global deviation TFs
# ---------------------------------------------------------------------------

def test_ideal_global_tf_rate_limits(specs):
    h_g = global_inertia(specs)
    cspec = design_omegas(W0, *specs)
    for kind in ("ac", "dc", "ds"):
        n1 = ideal_global_deviation_tf(specs, cspec, kind)
        assert ivt_rate_limit(n1) == pytest.approx(-1.0 / (2.0 * h_g), rel=1e-10)
        # and with unity concatenators as well
        n1u = ideal_global_deviation_tf(specs, None, kind)
        assert ivt_rate_limit(n1u) == pytest.approx(-1.0 / (2.0 * h_g), rel=1e-10)


def test_ideal_vs_local_branch_without_coupling(specs):
    # without coupling each branch keeps its own inertia rate exactly
    for spec, want in zip(specs, (-0.25, -1.0 / 6.0, -1.0 / 15.0)):
        assert ivt_rate_limit(build_open_loop_tf(spec)) == pytest.approx(want, rel=1e-12)


def test_ideal_global_tf_reduces_high_frequency_magnitude(specs):
    cspec = design_omegas(W0, *specs)
    n_ac0 = build_open_loop_tf(specs[0])
    n_ac1 = ideal_global_deviation_tf(specs, cspec, "ac")
    w = 100.0
    assert abs(tf_eval(n_ac1, 1j * w)) < abs(tf_eval(n_ac0, 1j * w))


# ---------------------------------------------------------------------------
# restoration in the Laplace picture
# ---------------------------------------------------------------------------

def test_restored_absolute_value_pins_nominal(ref_system, specs):
    sol = solve_nodal(ref_system)
    step = tf([1.0], [0.0, 1.0])
    for kind, spec in zip(("ac", "dc", "ds"), specs):
        dev = tf_series(sol.channel(kind), step)
        x_tf = restored_absolute_tf(dev, spec, restoration=True)
        # final value: lim s*x*(s) at small s through the rational form
        s = 1e-7
        got = (s * tf_eval(x_tf, s)).real
        assert got == pytest.approx(spec.x_nominal_pu, rel=1e-6)


def test_unrestored_absolute_value_keeps_droop_offset(ref_system, specs):
    sol = solve_nodal(ref_system)
    step = tf([1.0], [0.0, 1.0])
    p_lg_pu = 36e3 / 60e3
    for kind, spec in zip(("ac", "dc", "ds"), specs):
        dev = tf_series(sol.channel(kind), step)
        x_tf = restored_absolute_tf(dev, spec, restoration=False)
        s = 1e-7
        got = (s * tf_eval(x_tf, s)).real
        want = 1.0 + steady_droop_gain_pu(spec) * p_lg_pu
        assert got == pytest.approx(want, rel=1e-6)


# ---------------------------------------------------------------------------
# Bode export
# ---------------------------------------------------------------------------

def test_bode_constant_gain():
    rows = bode_export(tf([25.5], [1.0]), [0.1, 1.0, 10.0])
    for _, mag_db, phase in rows:
        assert mag_db == pytest.approx(20.0 * math.log10(25.5), rel=1e-12)
        assert phase == 0.0


def test_bode_concatenator_tail(specs):
    cspec = design_omegas(W0, *specs)
    from hmg.ilc import concatenator_tf

    rows = bode_export(concatenator_tf(cspec, "ac"), [1e3, 1e4])
    for _, mag_db, _ in rows:
        assert abs(mag_db) < 1e-3  # 0 dB tail


def test_bode_grid_validation():
    with pytest.raises(GecmError):
        bode_export(tf([1], [1, 1]), [1.0, 0.5])
    with pytest.raises(GecmError):
        bode_export(tf([1], [1, 1]), [-1.0, 1.0])
    grid = default_bode_grid()
    assert len(grid) == 300 and grid[0] == pytest.approx(1e-4)
