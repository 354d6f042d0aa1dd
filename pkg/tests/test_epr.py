import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqg import epr, numerics
from cqg.errors import QuadratureOrderError, ValidationError
from cqg.spin_states import EulerTriple, TwoParticleAngles

QUAD = numerics.haar_spec(8, 8, 8)
settings_angle = st.floats(-2 * math.pi, 2 * math.pi)


def D_up(a, b, g):
    return cmath.exp(0.5j * g) * cmath.exp(0.5j * a) * math.cos(b / 2)


def D_down(a, b, g):
    return cmath.exp(0.5j * g) * cmath.exp(-0.5j * a) * math.sin(b / 2)


def reference_amplitudes(z1, z2, ta, tb):
    """A_ij written out term by term from the coefficient formulas."""
    ca, sa, cb, sb = math.cos(ta / 2), math.sin(ta / 2), math.cos(tb / 2), math.sin(tb / 2)
    dv = (tb - ta) / 2
    u1 = D_up(*z1) * ca + D_down(*z1) * sa
    d1 = -D_up(*z1) * sa + D_down(*z1) * ca
    u2 = D_up(*z2) * cb + D_down(*z2) * sb
    d2 = -D_up(*z2) * sb + D_down(*z2) * cb
    return {"uu": u1 * u2 * math.sin(dv), "ud": u1 * d2 * math.cos(dv), "du": d1 * u2 * math.cos(dv), "dd": d1 * d2 * math.sin(dv)}


# -- analyzer ---------------------------------------------------------------


def test_sga_aligned():
    out = epr.sga_transform(1, 0, 0.0)
    assert (out.u, out.d) == (1, 0)


def test_sga_anti_aligned():
    out = epr.sga_transform(1, 0, math.pi)
    assert abs(out.u) <= 1e-16 and abs(out.d) == pytest.approx(1.0)


def test_sga_half():
    out = epr.sga_transform(1, 0, math.pi / 2)
    assert abs(out.u) ** 2 == pytest.approx(0.5) and abs(out.d) ** 2 == pytest.approx(0.5)


@settings(max_examples=50)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), settings_angle)
def test_sga_unitary(mix, phase, theta):
    a, b = math.cos(mix / 2), cmath.exp(1j * phase) * math.sin(mix / 2)
    out = epr.sga_transform(a, b, theta)
    assert abs(out.u) ** 2 + abs(out.d) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_sga_requires_normalized_input():
    with pytest.raises(ValidationError):
        epr.sga_transform(1, 1, 0.0)


def test_channel_density_closed_form():
    rng = np.random.default_rng(0)
    z = EulerTriple.random(rng, 200)
    for theta in (0.0, 0.7, 2.5):
        b = epr.marginal_bracket(z, theta)
        np.testing.assert_allclose(epr.channel_density(z, theta, "u"), 0.5 * (1 + b), atol=1e-15)
        np.testing.assert_allclose(epr.channel_density(z, theta, "d"), 0.5 * (1 - b), atol=1e-15)


# -- amplitudes -------------------------------------------------------------


def test_equal_settings_kill_like_channels():
    rng = np.random.default_rng(1)
    ang = TwoParticleAngles(EulerTriple.random(rng, 50), EulerTriple.random(rng, 50))
    A = epr.amplitude_coefficients(ang, 0.8, 0.8)
    assert np.all(A["uu"] == 0) and np.all(A["dd"] == 0)


def test_identity_triples_opposite_settings():
    z = EulerTriple(0.0, 0.0, 0.0)
    A = epr.amplitude_coefficients(TwoParticleAngles(z, z), 0.0, math.pi)
    ref = reference_amplitudes(z, z, 0.0, math.pi)
    for p in epr.PAIRS:
        assert abs(A[p] - ref[p]) <= 1e-15
    assert abs(A["uu"]) <= 1e-16


def test_amplitudes_against_term_by_term_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        z1, z2 = EulerTriple.random(rng), EulerTriple.random(rng)
        ta, tb = rng.uniform(-math.pi, math.pi, 2)
        A = epr.amplitude_coefficients(TwoParticleAngles(z1, z2), ta, tb)
        ref = reference_amplitudes(z1, z2, ta, tb)
        for p in epr.PAIRS:
            assert abs(A[p] - ref[p]) <= 1e-14


def test_raw_total_is_half():
    raw = epr.raw_fluxes(0.3, 1.9, QUAD)
    assert math.fsum(raw.values()) == pytest.approx(0.5, abs=1e-12)


def test_factorized_fluxes_match_six_angle_quadrature():
    for ta, tb in [(0.0, math.pi / 2), (0.4, 2.9), (1.0, 1.0)]:
        fact = epr.raw_fluxes(ta, tb, QUAD)
        direct = epr.raw_fluxes_direct(ta, tb, nodes=6)
        for p in epr.PAIRS:
            assert fact[p] == pytest.approx(direct[p], abs=1e-13)


@pytest.mark.parametrize("counts", [(4, 8, 8), (8, 2, 8), (8, 8, 3)])
def test_quadrature_order_guard(counts):
    with pytest.raises(QuadratureOrderError):
        epr.coincidence_fluxes(0.0, 1.0, numerics.haar_spec(*counts))


def test_minimal_exact_rule():
    t = epr.coincidence_fluxes(0.0, 1.3, numerics.haar_spec(5, 3, 5))
    assert t.uu == pytest.approx(0.5 * math.sin(0.65) ** 2, abs=1e-14)


# -- fluxes -----------------------------------------------------------------


def test_fluxes_quarter_turn():
    t = epr.coincidence_fluxes(0.0, math.pi / 2, QUAD)
    for p in epr.PAIRS:
        assert t[p] == pytest.approx(0.25, abs=1e-12)
    assert t.raw_total == pytest.approx(0.5, abs=1e-12)


def test_fluxes_equal_settings():
    t = epr.coincidence_fluxes(0.9, 0.9, QUAD)
    assert t.uu == 0.0 and t.dd == 0.0
    assert t.ud == pytest.approx(0.5) and t.du == pytest.approx(0.5)


def test_fluxes_opposite_settings():
    t = epr.coincidence_fluxes(0.0, math.pi, QUAD)
    assert t.uu == pytest.approx(0.5, abs=1e-12) and t.ud == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(settings_angle, settings_angle, st.floats(-math.pi, math.pi))
def test_flux_table_invariants(ta, tb, shift):
    t = epr.coincidence_fluxes(ta, tb, QUAD)
    assert t.total == pytest.approx(1.0, abs=1e-10)
    assert abs(t.uu - t.dd) <= 1e-10 and abs(t.ud - t.du) <= 1e-10
    assert all(0.0 <= t[p] <= 1.0 + 1e-12 for p in epr.PAIRS)
    moved = epr.coincidence_fluxes(ta + shift, tb + shift, QUAD)
    for p in epr.PAIRS:
        assert abs(moved[p] - t[p]) <= 1e-10
    # the sign convention of the half-angle difference is unobservable
    swapped = epr.coincidence_fluxes(tb, ta, QUAD)
    for p in epr.PAIRS:
        assert abs(swapped[p] - t[p]) <= 1e-10


def test_correlation_values():
    assert epr.correlation(0.4, 0.4, QUAD) == pytest.approx(-1.0, abs=1e-12)
    assert abs(epr.correlation(0.0, math.pi / 2, QUAD)) <= 1e-8
    assert epr.correlation(0.0, math.pi, QUAD) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(settings_angle, settings_angle)
def test_correlation_closed_form(ta, tb):
    assert epr.correlation(ta, tb, QUAD) == pytest.approx(-math.cos(tb - ta), abs=1e-10)


# -- marginals and no-signalling ---------------------------------------------


def test_marginal_pole_local_triple():
    m = epr.marginal_densities("A", 0.0, 1.0, QUAD)
    dens = m(EulerTriple(0.0, 0.0, 0.3))
    assert dens["u"] > 0 and dens["d"] == pytest.approx(0.0, abs=1e-15)


def test_marginal_equator_equal_channels():
    for theta in (0.0, 0.9, 2.0):
        m = epr.marginal_densities("A", theta, 0.4, QUAD)
        dens = m(EulerTriple(math.pi / 2, math.pi / 2, 1.0))
        assert dens["u"] == pytest.approx(dens["d"], abs=1e-14)


def test_bracket_averages_out():
    for theta in (0.0, 0.7, 2.2):
        avg = numerics.tensor_quadrature(lambda a, b, g: epr.marginal_bracket(EulerTriple(a, b, g), theta), QUAD)
        assert abs(avg) <= 1e-10


@pytest.mark.parametrize("side", ["A", "B"])
def test_no_signalling(side):
    rng = np.random.default_rng(3)
    remote = [2 * math.pi * k / 36 for k in range(36)]
    for _ in range(3):
        z = EulerTriple.random(rng, margin=0.05)
        assert epr.no_signalling_deviation(z, 0.7, remote, side, QUAD) <= 1e-8


@pytest.mark.parametrize("side", ["A", "B"])
def test_marginal_proportional_to_bracket(side):
    rng = np.random.default_rng(4)
    m = epr.marginal_densities(side, 0.3, 2.1, QUAD)
    for _ in range(5):
        ratio, resid = m.proportionality(EulerTriple.random(rng, margin=0.05))
        assert resid <= 1e-8
        assert ratio == pytest.approx(1.0, abs=1e-12)  # raw marginal is exactly (1 +/- bracket)/4


def test_unpolarized_totals():
    m = epr.marginal_densities("B", 0.5, 1.7, numerics.haar_spec(6, 4, 6))
    totals = m.channel_totals()
    assert m.grand_total == pytest.approx(0.5, abs=1e-12)
    assert totals["u"] == pytest.approx(0.5, abs=1e-10) and totals["d"] == pytest.approx(0.5, abs=1e-10)


def test_marginal_side_validation():
    with pytest.raises(ValidationError):
        epr.marginal_densities("C", 0.0, 0.0, QUAD)


def test_joint_does_not_factor():
    ang = TwoParticleAngles(EulerTriple(0.3, 1.0, 0.2), EulerTriple(2.0, 2.2, 1.0))
    assert abs(epr.factorization_gap(ang, 0.0, math.pi / 3, "uu")) > 1e-3
    ang = TwoParticleAngles(EulerTriple(1.0, 0.5, 0.0), EulerTriple(0.0, 1.5, 0.0))
    assert abs(epr.factorization_gap(ang, 0.0, math.pi / 3, "ud")) > 1e-3


def test_joint_factors_when_trig_weights_coincide():
    # at a half-angle difference of 45 degrees sin^2 = cos^2 and |A_ij|^2 = f_i g_j / 2
    ang = TwoParticleAngles(EulerTriple(0.3, 1.0, 0.2), EulerTriple(2.0, 2.2, 1.0))
    for pair in epr.PAIRS:
        assert abs(epr.factorization_gap(ang, 0.0, math.pi / 2, pair)) <= 1e-15


# -- Bell functionals --------------------------------------------------------


def test_redhead_values():
    assert epr.bell_redhead(0.0, QUAD) == pytest.approx(2.0, abs=1e-6)
    assert epr.bell_redhead(math.pi / 6, QUAD) == pytest.approx(2.5, abs=1e-6)
    assert epr.bell_redhead(math.pi / 4, QUAD) == pytest.approx(2.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi))
def test_redhead_matches_printed_form(d):
    assert epr.bell_redhead(d, QUAD) == pytest.approx(abs(1 + 2 * math.cos(2 * d) - math.cos(4 * d)), abs=1e-10)


def test_bell_scan_interior_violated():
    report = epr.bell_scan([math.radians(5 * k) for k in range(1, 9)], QUAD)
    assert report.all_violated
    assert report.max_row.delta == pytest.approx(math.radians(30))
    assert all(abs(r.E) <= 1.0 for r in report.rows)


def test_bell_scan_boundaries_not_violated():
    report = epr.bell_scan([0.0, math.pi / 4], QUAD)
    assert not any(r.violated for r in report.rows)


def test_chsh_values():
    assert epr.chsh([0, math.pi / 2, math.pi / 4, 3 * math.pi / 4], QUAD) == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert epr.chsh([0, 0, 0, 0], QUAD) == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(settings_angle, min_size=4, max_size=4))
def test_chsh_bounds(s):
    val = epr.chsh(s, QUAD)
    assert val <= 2 * math.sqrt(2) + 1e-9
    degenerate = epr.chsh([s[0], s[1], s[2], s[2]], QUAD)
    assert degenerate <= 2.0 + 1e-9


# -- Monte Carlo -------------------------------------------------------------


@pytest.fixture(scope="module")
def mc_million():
    return epr.mc_run(0.0, math.pi / 2, epr.MCConfig(1_000_000, seed=42))


def test_mc_quarter_turn(mc_million):
    r = mc_million
    for p in epr.PAIRS:
        assert abs(r.table[p] - 0.25) <= 3 * r.stderr[p]
        assert r.stderr[p] < 5e-4
    assert r.raw_mean == pytest.approx(0.5, abs=5e-3)


def test_mc_error_scaling(mc_million):
    small = epr.mc_run(0.0, math.pi / 2, epr.MCConfig(1_000, seed=42))
    ratio = small.stderr["uu"] / mc_million.stderr["uu"]
    assert math.sqrt(1000) / 1.5 <= ratio <= math.sqrt(1000) * 1.5


def test_mc_independent_of_stream_count():
    cfg = dict(samples=200_000, seed=7)
    one = epr.mc_run(0.3, 1.4, epr.MCConfig(streams=1, **cfg))
    four = epr.mc_run(0.3, 1.4, epr.MCConfig(streams=4, **cfg))
    assert one.table == four.table and one.stderr == four.stderr


def test_mc_seed_changes_result():
    a = epr.mc_run(0.3, 1.4, epr.MCConfig(10_000, seed=1))
    b = epr.mc_run(0.3, 1.4, epr.MCConfig(10_000, seed=2))
    assert a.table != b.table


def test_mc_thread_cap(monkeypatch):
    monkeypatch.setenv("CQG_THREADS", "2")
    capped = epr.mc_run(0.3, 1.4, epr.MCConfig(150_000, seed=3, streams=8))
    monkeypatch.delenv("CQG_THREADS")
    assert capped.table == epr.mc_run(0.3, 1.4, epr.MCConfig(150_000, seed=3)).table


def test_mc_config_validation():
    with pytest.raises(ValidationError):
        epr.MCConfig(0)
    with pytest.raises(ValidationError):
        epr.MCConfig(10, streams=0)
    with pytest.raises(ValidationError):
        epr.MCConfig(10, seed=-1)
