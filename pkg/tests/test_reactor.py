import numpy as np
import pytest

from unitphysics.constants import GAS_CONSTANT as R
from unitphysics.reactor import (
    ConfigError,
    IntegrationError,
    NoIgnitionError,
    ReactorConfig,
    Trajectory,
    TrajectoryFormatError,
    detect_idt,
    integrate,
    mass_to_mole_map,
    mole_to_mass_map,
    read_header,
    rhs_const_volume,
    step_euler,
    step_rk4,
    stoich_composition,
)
from unitphysics.thermochem import MixtureState, default_mechanism, species_u

from conftest import toy_isomer_mechanism


# --- composition ----------------------------------------------------------

def test_stoich_h2_o2():
    X = stoich_composition("H2", "O2")
    assert X == pytest.approx({"H2": 2 / 3, "O2": 1 / 3}, abs=1e-15)


def test_stoich_h2_air(mech):
    Y = mole_to_mass_map(stoich_composition("H2", "air"), mech)
    assert Y["H2"] == pytest.approx(0.02852, abs=1e-4)
    assert Y["O2"] == pytest.approx(0.22637, abs=1e-4)
    assert Y["N2"] == pytest.approx(0.74511, abs=1e-4)


def test_mole_mass_round_trip(mech):
    X = {"H2": 0.3, "O2": 0.2, "H2O": 0.1, "N2": 0.4}
    back = mass_to_mole_map(mole_to_mass_map(X, mech), mech)
    for k in X:
        assert back[k] == pytest.approx(X[k], abs=1e-14)


@pytest.mark.parametrize("fuel,ox", [("CH4", "O2"), ("H2", "F2")])
def test_stoich_unknown(fuel, ox):
    with pytest.raises(ConfigError):
        stoich_composition(fuel, ox)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": 1e-5, "t_end": 1e-6}, {"T0": -1.0},
                                {"phi": -1.0}, {"integrator": "bdf"}, {"idt_criterion": "peak_OH"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        ReactorConfig(**kw)


def test_config_hash_stable():
    a, b = ReactorConfig(), ReactorConfig()
    assert a.config_hash() == b.config_hash()
    assert ReactorConfig(T0=1400.0).config_hash() != a.config_hash()


# --- right-hand side ------------------------------------------------------

def test_rhs_inert(mech):
    st_ = MixtureState.from_TPX(mech, 1300.0, 101325.0, {"N2": 1.0})
    dY, dT = rhs_const_volume(st_)
    assert np.all(dY == 0.0) and dT == 0.0


def test_rhs_mass_conservation(mech, reference):
    for ref in reference["states"]:
        dY, _ = rhs_const_volume(MixtureState(ref["T"], ref["rho"], np.array(ref["Y"]), mech))
        assert abs(dY.sum()) <= 1e-12 * np.abs(dY).max()


def test_rhs_energy_balance_against_reference(mech, reference):
    """dT/dt rebuilt from species u, mixture cv and reference production rates."""
    ref = reference["states"][0]
    st_ = MixtureState(ref["T"], ref["rho"], np.array(ref["Y"]), mech)
    wdot = np.array(ref["omega_dot"])
    u = np.array([species_u(s, st_.T) for s in mech.species])
    W = mech.molecular_weights
    expected = -(u * wdot * W).sum() / (ref["rho"] * ref["cv_mass"])
    dY, dT = rhs_const_volume(st_)
    assert dT == pytest.approx(expected, rel=1e-9)
    np.testing.assert_allclose(dY, wdot * W / ref["rho"], rtol=1e-9, atol=1e-12 * np.abs(dY).max())


# Reference value from an independent kinetics library for the fresh
# stoichiometric H2/O2 mixture at 1300 K, 1 atm: chain initiation is
# endothermic, so the mixture cools slightly before the radical pool builds.
DTDT0_REFERENCE = -837.6494814930884


def test_rhs_initial_rate(mech, benchmark_config):
    _, dT = rhs_const_volume(benchmark_config.initial_state(mech))
    assert np.sign(dT) == np.sign(DTDT0_REFERENCE)
    assert dT == pytest.approx(DTDT0_REFERENCE, rel=1e-9)


def test_rhs_heats_once_radicals_form(mech, reference):
    ref = reference["states"][0]
    _, dT = rhs_const_volume(MixtureState(ref["T"], ref["rho"], np.array(ref["Y"]), mech))
    assert dT > 0


# --- steppers -------------------------------------------------------------

@pytest.mark.parametrize("stepper", [step_euler, step_rk4])
def test_zero_step_identity(mech, benchmark_config, stepper):
    s0 = benchmark_config.initial_state(mech)
    s1 = stepper(s0, 0.0)
    assert s1.T == s0.T and np.array_equal(s1.Y, s0.Y)


def test_step_recomputes_pressure(mech, benchmark_config):
    s1 = step_rk4(benchmark_config.initial_state(mech), 1e-9)
    assert s1.p == pytest.approx(s1.rho * R * s1.T / s1.mean_W, rel=1e-15)


def _surrogate_error(method, dt):
    toy = toy_isomer_mechanism(A=1.0)
    cfg = ReactorConfig(T0=300.0, p0=1e5, X={"A": 1.0}, phi=None, dt=dt, t_end=1.0,
                        integrator=method, output_stride=1)
    traj = integrate(cfg, toy)
    assert traj.t[-1] == pytest.approx(1.0)
    return abs(traj.Y[-1, 0] - np.exp(-1.0))


@pytest.mark.parametrize("method,order,tol", [("rk4", 4.0, 0.2), ("euler", 1.0, 0.1)])
def test_observed_order(method, order, tol):
    errs = [_surrogate_error(method, dt) for dt in (1e-2, 5e-3, 2.5e-3)]
    for a, b in zip(errs, errs[1:]):
        assert np.log2(a / b) == pytest.approx(order, abs=tol)


def test_surrogate_isothermal():
    toy = toy_isomer_mechanism(A=1.0)
    st_ = MixtureState(300.0, 1.0, np.array([0.7, 0.3]), toy)
    dY, dT = rhs_const_volume(st_)
    assert dT == 0.0
    assert dY[0] == pytest.approx(-0.7, rel=1e-14)


# --- integration ----------------------------------------------------------

def test_inert_trajectory_constant(mech):
    cfg = ReactorConfig(T0=1300.0, X={"N2": 1.0}, phi=None, dt=1e-7, t_end=1e-5)
    traj = integrate(cfg, mech)
    assert np.all(traj.T == 1300.0)
    assert np.all(traj.Y == traj.Y[0])
    assert np.all(traj.p == traj.p[0])


def test_benchmark_ignites(benchmark_trajectory):
    traj = benchmark_trajectory
    assert traj.T.max() > 2500.0
    assert np.all(np.diff(traj.t) > 0)
    assert np.abs(traj.Y.sum(axis=1) - 1.0).max() <= 1e-10
    assert traj.metadata["status"] == "completed"


def test_benchmark_idt(benchmark_trajectory):
    assert detect_idt(benchmark_trajectory) == pytest.approx(1.13179e-05, rel=0.30)
    assert detect_idt(benchmark_trajectory) == pytest.approx(1.13203e-05, rel=0.005)


def test_benchmark_against_reference_idt(benchmark_trajectory, reference):
    sweep = reference["idt_const_volume_max_dTdt"]
    i = sweep["T0"].index(1300.0)
    assert detect_idt(benchmark_trajectory) == pytest.approx(sweep["idt"][i], rel=1e-3)


def test_peak_is_bracketed(benchmark_trajectory):
    traj = benchmark_trajectory
    i = int(np.argmax(traj.dTdt))
    dt = traj.metadata["config"]["dt"]
    assert traj.t[i] - traj.t[i - 1] == pytest.approx(dt, rel=1e-6)
    assert traj.t[i + 1] - traj.t[i] == pytest.approx(dt, rel=1e-6)


def test_benchmark_records_eos_consistent(benchmark_trajectory):
    traj = benchmark_trajectory
    Wk = default_mechanism().molecular_weights
    Wbar = 1.0 / (traj.Y @ (1.0 / Wk))
    assert np.max(np.abs(traj.p - traj.rho * R * traj.T / Wbar) / traj.p) <= 1e-12


def test_internal_energy_constant(benchmark_trajectory):
    u = benchmark_trajectory.extra["u"]
    assert np.max(np.abs(u - u[0])) / abs(u[0]) <= 1e-6


def test_air_case(air_trajectory, reference):
    y = air_trajectory.species_column("N2")
    assert np.max(np.abs(y - y[0])) <= 1e-12
    assert detect_idt(air_trajectory) == pytest.approx(2.7013e-05, rel=1e-3)


def test_coarse_step_fails_loudly(mech):
    cfg = ReactorConfig(dt=1e-9, t_end=2e-5)
    with pytest.raises(IntegrationError) as info:
        integrate(cfg, mech)
    err = info.value
    assert err.quantity.startswith("Y_") or err.quantity == "T"
    assert err.trajectory is not None and err.trajectory.metadata["status"] == "failed"
    assert err.t > 0


def test_guard_trips(mech):
    cfg = ReactorConfig(T0=1300.0, dt=1e-10, t_end=2e-5, T_guard=2000.0)
    with pytest.raises(IntegrationError) as info:
        integrate(cfg, mech)
    assert info.value.quantity == "T"
    assert info.value.value >= 2000.0
    # only accepted states are kept on the partial trajectory
    assert info.value.trajectory.T.max() < 2000.0
    assert info.value.trajectory.metadata["failure"]["quantity"] == "T"


def test_out_of_range_start(mech):
    from unitphysics.thermochem import ThermoRangeError

    with pytest.raises(ThermoRangeError):
        integrate(ReactorConfig(T0=250.0, dt=1e-9, t_end=1e-8), mech)


# --- IDT detection --------------------------------------------------------

def _synthetic(t, T, dTdt):
    n = len(t)
    return Trajectory(t=t, T=T, rho=np.ones(n), p=np.ones(n), Y=np.ones((n, 1)), species=("N2",), dTdt=dTdt)


def test_idt_synthetic_peak():
    t = np.linspace(0, 1e-5, 101)
    dTdt = np.exp(-((t - 5e-6) / 1e-6) ** 2) * 1e8
    T = 1000 + np.cumsum(dTdt) * 1e-7
    assert detect_idt(_synthetic(t, T, dTdt)) == pytest.approx(5e-6, rel=1e-12)


def test_idt_ties_take_earliest():
    t = np.arange(6) * 1.0
    dTdt = np.array([0.0, 5.0, 1.0, 5.0, 0.0, 0.0])
    T = 1000 + np.array([0, 5, 6, 11, 11, 11.0])
    assert detect_idt(_synthetic(t, T, dTdt)) == 1.0


def test_idt_threshold():
    t = np.arange(5) * 1.0
    T = np.array([1000.0, 1050, 1100, 1200, 1300])
    assert detect_idt(_synthetic(t, T, np.ones(5)), "threshold_rise", 100.0) == 2.0


def test_no_ignition():
    t = np.linspace(0, 1, 10)
    traj = _synthetic(t, np.full(10, 1000.0) - t, -np.ones(10))
    with pytest.raises(NoIgnitionError):
        detect_idt(traj)
    with pytest.raises(NoIgnitionError):
        detect_idt(traj, "threshold_rise")


def test_threshold_differs_from_peak(benchmark_trajectory):
    a = detect_idt(benchmark_trajectory, "max_dTdt")
    b = detect_idt(benchmark_trajectory, "threshold_rise", 100.0)
    assert b < a and abs(a - b) / a > 0.01


# --- file format ----------------------------------------------------------

def test_trajectory_round_trip(benchmark_trajectory, benchmark_file):
    back = Trajectory.read(benchmark_file)
    assert back.columns() == benchmark_trajectory.columns()
    np.testing.assert_array_equal(back.T, benchmark_trajectory.T)
    np.testing.assert_array_equal(back.Y, benchmark_trajectory.Y)
    np.testing.assert_array_equal(back.extra["omega"], benchmark_trajectory.extra["omega"])
    hdr = read_header(benchmark_file)
    assert hdr["units"]["T"] == "K" and hdr["units"]["omega_H2"] == "kg/m3/s"
    assert hdr["metadata"]["mechanism_id"] == "h2o2-gri30-subset"
    assert len(hdr["metadata"]["config_hash"]) == 16


def test_trajectory_bad_file(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"format": "other"}\n')
    with pytest.raises(TrajectoryFormatError):
        Trajectory.read(p)
    p.write_text("not json\n")
    with pytest.raises(TrajectoryFormatError):
        Trajectory.read(p)
