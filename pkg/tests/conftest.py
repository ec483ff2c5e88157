"""Shared fixtures: the reference parameter set used across the suites."""

import pytest

from hmg.subgrid import AC, DC, DS, SubgridSpec, design_droop

# Restoration PI gains shared by the reference setup (slow on purpose;
# hmg.config.DEFAULT_K_P / DEFAULT_K_I are the shipped defaults).
K_P, K_I = 0.005, 0.05


def make_ac(**kw):
    spec = SubgridSpec(
        kind=AC, x_max=51.0, x_min=49.0, x_nominal=50.0, p_max_w=20e3,
        inertia_h=2.0, damping_d=1.0, t_g=0.1, f_hp=0.3, t_ch=0.2, t_rh=7.0,
        k_p=K_P, k_i=K_I,
    )
    if kw:
        from dataclasses import replace
        spec = replace(spec, **kw)
    return design_droop(spec)


def make_dc(**kw):
    spec = SubgridSpec(
        kind=DC, x_max=380.0, x_min=370.0, x_nominal=370.0, p_max_w=20e3,
        inertia_h=3.0, damping_d=1.0, t_g=0.1, f_hp=0.3, t_ch=0.2, t_rh=7.0,
        k_p=K_P, k_i=K_I,
    )
    if kw:
        from dataclasses import replace
        spec = replace(spec, **kw)
    return design_droop(spec)


def make_ds(**kw):
    spec = SubgridSpec(
        kind=DS, x_max=710.0, x_min=690.0, x_nominal=700.0, p_max_w=20e3,
        y_h=7.5, k_p=K_P, k_i=K_I,
    )
    if kw:
        from dataclasses import replace
        spec = replace(spec, **kw)
    return design_droop(spec)


@pytest.fixture
def ac_spec():
    return make_ac()


@pytest.fixture
def dc_spec():
    return make_dc()


@pytest.fixture
def ds_spec():
    return make_ds()
