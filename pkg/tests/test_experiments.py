import numpy as np
import pytest

from magnon_blockade import experiments as ex
from magnon_blockade.errors import InvalidParameterError, RegimeViolationError
from magnon_blockade.hilbert import EffectiveParams, full_params_for
from magnon_blockade.lindblad import ThermalConfig

BASE = EffectiveParams()
OPT0 = BASE.replace(g2=0.161 * 0.8)
OPT1 = BASE.replace(delta1=-0.276, delta2=0.1, delta_q=0.1, g2=0.137 * 0.8)


def test_axis_validation():
    with pytest.raises(InvalidParameterError):
        ex.AxisSpec("delta1", (0.0,))
    with pytest.raises(InvalidParameterError):
        ex.AxisSpec("delta1", (0.0, 1.0, 0.5))
    with pytest.raises(InvalidParameterError):
        ex.AxisSpec("nope", (0.0, 1.0))
    with pytest.raises(InvalidParameterError):
        ex.sweep_2d(BASE, ex.AxisSpec("delta1", (0, 1)), ex.AxisSpec("delta1", (0, 1)))


def test_apply_axes_ratio_after_g1():
    p = ex.apply_axes(BASE, {"g2_ratio": 0.5, "g1": 0.4})
    assert p.g1 == 0.4 and p.g2 == 0.2


def test_channels_agree_on_small_grid():
    a1, a2 = ex.AxisSpec.linspace("delta1", -0.5, 0.5, 5), ex.AxisSpec.linspace("g2_ratio", 0.1, 0.3, 4)
    grid = ex.sweep_2d(BASE, a1, a2, "both")
    assert grid.values["numeric"].shape == (5, 4)
    # analytic and numeric agree away from the blockade dip
    far = grid.values["numeric"][0, :]
    assert np.allclose(grid.values["analytic"][0, :], far, rtol=1e-2)
    for ch in ("numeric", "analytic"):
        m = grid.minimum[ch]
        assert a1.values[0] <= m.coords[0] <= a1.values[-1]
        assert a2.values[0] <= m.coords[1] <= a2.values[-1]
    assert len(grid.rows()) == 20
    assert np.max(grid.diagnostics["hermiticity"]) < 1e-10


def test_sweep_is_deterministic():
    a1, a2 = ex.AxisSpec.linspace("delta1", -0.5, 0.5, 4), ex.AxisSpec.linspace("g2_ratio", 0.1, 0.3, 3)
    r1 = ex.sweep_2d(OPT1, a1, a2, "numeric").rows()
    r2 = ex.sweep_2d(OPT1, a1, a2, "numeric").rows()
    assert r1 == r2


def test_workers_match_serial():
    points = [OPT0.replace(delta1=d) for d in np.linspace(-0.3, 0.3, 8)]
    assert np.array_equal(ex.evaluate_numeric(points, 3, 1), ex.evaluate_numeric(points, 3, 2))


def test_flagged_cells_excluded():
    axis = ex.AxisSpec("omega_drive", (0.0, 1e-3, 2e-3))
    grid = ex.sweep_1d(BASE.replace(g1=0, g2=0), axis, "numeric", n=3)
    assert bool(grid.flags["numeric"][0])
    assert grid.minimum["numeric"].index != (0,)
    assert grid.rows()[0]["flag"] == "unoccupied"


def test_quadratic_refinement_1d():
    x = np.linspace(-1, 1, 11)
    axis = ex.AxisSpec("delta1", tuple(x))
    m = ex.locate_minimum([axis], (x - 0.13) ** 2, np.zeros(11, bool), "analytic")
    assert m.refined and m.coords[0] == pytest.approx(0.13, abs=1e-12)


def test_quadratic_refinement_2d():
    x, y = np.linspace(-1, 1, 11), np.linspace(0, 0.5, 11)
    X, Y = np.meshgrid(x, y, indexing="ij")
    v = (X - 0.07) ** 2 + 3 * (Y - 0.21) ** 2 + 0.5 * (X - 0.07) * (Y - 0.21)
    m = ex.locate_minimum([ex.AxisSpec("delta1", tuple(x)), ex.AxisSpec("g2_ratio", tuple(y))], v,
                          np.zeros_like(v, bool), "analytic")
    assert m.refined
    assert m.coords == pytest.approx((0.07, 0.21), abs=1e-10)


def test_minimum_tie_break_first_cell():
    v = np.ones((2, 2))
    axes = [ex.AxisSpec("delta1", (0, 1)), ex.AxisSpec("g2_ratio", (0, 1))]
    assert ex.locate_minimum(axes, v, np.zeros((2, 2), bool), "numeric").index == (0, 0)


def test_sweep_1d_slices():
    grid = ex.sweep_1d(OPT0, ex.AxisSpec.linspace("delta1", -0.2, 0.2, 41), "both")
    assert abs(grid.minimum["numeric"].coords[0]) <= 0.01
    grid = ex.sweep_1d(OPT1, ex.AxisSpec.linspace("g2_ratio", 0.1, 0.18, 33), "both")
    assert grid.minimum["numeric"].coords[0] == pytest.approx(0.137, abs=0.005)
    flat = ex.sweep_1d(BASE.replace(g1=0, g2=0), ex.AxisSpec.linspace("delta1", -1, 1, 5), "both")
    assert np.allclose(flat.values["numeric"], 1, atol=1e-6)
    assert np.allclose(flat.values["analytic"], 1, atol=1e-4)


def test_optimal_curve():
    rows = ex.optimal_curve([0.1, 0.137, 0.3], [0.0, 0.1], BASE)
    table = {(r.detuning, r.g2_ratio): r.delta1_opt for r in rows}
    for ratio in (0.1, 0.137, 0.3):
        assert abs(table[(0.0, ratio)]) <= 1e-3
    assert table[(0.1, 0.137)] == pytest.approx(-0.276, abs=0.01)


def test_optimal_curve_monotone_in_ratio():
    ratios = np.linspace(0.0, 0.5, 51)
    rows = ex.optimal_curve(ratios, [0.1], BASE)
    d = np.array([r.delta1_opt for r in rows])
    assert np.all(np.diff(d) > 0)


def test_unity_crossing():
    assert ex.unity_crossing([0, 1, 2], [0.5, 0.9, 1.3]) == pytest.approx(1.25)
    assert ex.unity_crossing([0, 1], [0.5, 0.6]) is None


def test_thermal_sweep_zero_temperature_matches_optima():
    t = [0.0, 0.005, 0.01]
    sweep = ex.thermal_sweep(ThermalConfig(), {"a": OPT0, "b": OPT1}, t)
    assert sweep.curves["a"][0] == pytest.approx(2.3369e-5, rel=1e-3)
    assert sweep.n_th1[0] == 0
    with pytest.raises(InvalidParameterError):
        ex.thermal_sweep(ThermalConfig(), {"a": OPT0}, [0.01, 0.0])


def test_thermal_sweep_monotone_to_ten_mk():
    t = np.arange(0, 0.0101, 0.001)
    sweep = ex.thermal_sweep(ThermalConfig(), {"a": OPT0, "b": OPT1}, t)
    for curve in sweep.curves.values():
        assert np.all(np.diff(curve) >= -1e-12 * curve[:-1])


def test_adiabatic_trivial_couplings():
    target = BASE.replace(g1=0.0, g2=0.0, delta1=0.05)
    full = full_params_for(target, 200.0)
    # decoupled cavities need their own decay for a unique steady state
    rep = ex.adiabatic_validation(full, cavity_decay=1.0)
    assert rep.deviation < 1e-8


def test_adiabatic_regime_violation():
    with pytest.raises(RegimeViolationError):
        ex.adiabatic_validation(full_params_for(OPT0, 20.0))


def test_adiabatic_deviation_shrinks_with_detuning():
    devs = [ex.adiabatic_validation(full_params_for(OPT0, d)).deviation for d in (200.0, 400.0)]
    assert devs[1] < devs[0]


def test_relative_deviation():
    assert ex.relative_deviation(1.0, 0.5) == 0.5
    assert ex.relative_deviation(0.0, 0.0) == 0.0


def test_convergence_check():
    table = ex.convergence_check(OPT0, (3, 4, 6))
    assert table.converged_at == 4
    assert table.rows[0].change_to_next > table.rows[1].change_to_next
    strong = ex.convergence_check(OPT0.replace(omega_drive=0.1), (3, 4, 6))
    assert not strong.converged(4)
    with pytest.raises(InvalidParameterError):
        ex.convergence_check(OPT0, (4, 3))


def test_truncation_ordering_at_optimum():
    from magnon_blockade.lindblad import g2_numeric

    g3, g4, g6 = (g2_numeric(OPT0, n) for n in (3, 4, 6))
    assert abs(g3 - g6) > abs(g4 - g6)
