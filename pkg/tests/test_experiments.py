import numpy as np
import pytest

from sechgate.experiments import (
    FidelitySurface,
    LeakageConfig,
    ReferenceMismatchError,
    SweepConfig,
    checksum,
    cphase_point,
    detuning_grid,
    ensemble_average_fidelity,
    equal_superposition,
    gate_fidelity,
    leakage_scan,
    lifetime_baseline,
    run_grid,
    sweep_hyperfine,
    sweep_lifetime,
)
from sechgate.ion_model import QUBIT_INDICES

SMALL = dict(dc_count=3, dt_count=3)


def _square(x):
    return x * x


def _fragile(x):
    if x == 2:
        raise RuntimeError("boom")
    return float(x)


# ---------------------------------------------------------------- fidelity


def test_fidelity_identity_cases(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    u0 = np.linalg.qr(a)[0]
    assert gate_fidelity(u0, u0) == pytest.approx(1, abs=1e-12)
    psi = equal_superposition()
    out = u0 @ psi
    assert gate_fidelity(np.outer(out, out.conj()), u0) == pytest.approx(1, abs=1e-12)


def test_fidelity_cz_against_identity():
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    assert gate_fidelity(cz, np.eye(4)) == pytest.approx(0.25, abs=1e-15)


def test_fidelity_nine_dim_inputs():
    u = np.eye(9, dtype=complex)
    assert gate_fidelity(u, np.eye(4)) == pytest.approx(1)
    full = np.zeros(9, dtype=complex)
    full[list(QUBIT_INDICES)] = 0.5
    assert gate_fidelity(np.outer(full, full.conj()), np.eye(4)) == pytest.approx(1)
    # population outside the qubit block lowers the density-matrix fidelity
    rho = 0.9 * np.outer(full, full.conj())
    rho[8, 8] = 0.1
    assert gate_fidelity(rho, np.eye(4), density=True) == pytest.approx(0.9)


def test_fidelity_errors():
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(3), np.eye(4))
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(4), np.eye(9))
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(4), np.eye(4), psi_in=[1, 1, 0, 0])
    bad = np.zeros(9)
    bad[8] = 1.0  # |ee>
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(9), np.eye(4), psi_in=bad)
    with pytest.raises(ValueError):
        gate_fidelity(2 * np.eye(4), np.eye(4))


def test_checksum_stable_and_sensitive():
    u = np.diag([1, 1j, -1, -1j])
    assert checksum(u) == checksum(u.copy())
    assert checksum(u) == checksum(u + 1e-14)
    assert checksum(u) != checksum(u * np.exp(1e-6j))
    assert len(checksum(u)) == 16


# ---------------------------------------------------------------- grid runner


def test_run_grid_preserves_order_in_parallel():
    args = [(k,) for k in range(23)]
    serial, _ = run_grid(_square, args, jobs=1)
    parallel, failures = run_grid(_square, args, jobs=2)
    assert np.array_equal(serial, parallel)
    assert list(parallel) == [k * k for k in range(23)]
    assert failures == []


def test_run_grid_records_failures():
    values, failures = run_grid(_fragile, [(0,), (1,), (2,), (3,)])
    assert np.isnan(values[2]) and list(values[[0, 1, 3]]) == [0, 1, 3]
    assert len(failures) == 1 and failures[0]["index"] == 2
    assert "boom" in failures[0]["error"]


# ---------------------------------------------------------------- surfaces


def test_surface_validation():
    axes = (("a", "MHz", np.arange(2)), ("b", "MHz", np.arange(3)))
    with pytest.raises(ValueError):
        FidelitySurface(axes, np.zeros((3, 2)), "x")
    with pytest.raises(ValueError):
        FidelitySurface(axes, np.full((2, 3), 1.1), "x")
    s = FidelitySurface(axes, np.array([[0.1, 0.2, 0.3], [0.5, 0.5, 0.9]]), "x")
    assert s.variation(0) == pytest.approx(0.6)
    assert s.variation(1) == pytest.approx(0.4)
    assert list(s.rows())[1] == (0.0, 1.0, 0.2)


def test_reference_mismatch_rejected():
    axes = (("a", "MHz", np.arange(2)), ("b", "MHz", np.arange(2)))
    a = FidelitySurface(axes, np.ones((2, 2)), "aaaa")
    b = FidelitySurface(axes, np.ones((2, 2)), "bbbb")
    with pytest.raises(ReferenceMismatchError):
        a.minus(b)
    assert np.all(a.minus(FidelitySurface(axes, np.ones((2, 2)), "aaaa")) == 0)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(dc_count=0)
    with pytest.raises(ValueError):
        SweepConfig(dt_min=0.1, dt_max=0.0)
    with pytest.raises(ValueError):
        SweepConfig(te_list=())
    assert np.allclose(SweepConfig().input_state(), 0.5)


def test_reference_point_fidelity(reference, sweep_config):
    f = cphase_point(sweep_config, reference.unitary, 0.0, 0.0, False)
    assert f >= 0.99
    assert f == pytest.approx(0.99977, abs=1e-5)


def test_reference_checksum_recorded(reference, sweep_config):
    s = sweep_hyperfine(SweepConfig(**SMALL), reference)
    assert s.reference_checksum == reference.checksum
    assert s.values.shape == (3, 3)


def test_sweep_is_deterministic_and_order_free(reference):
    cfg = SweepConfig(**SMALL)
    a = sweep_hyperfine(cfg, reference)
    b = sweep_hyperfine(SweepConfig(jobs=2, **SMALL), reference)
    assert np.array_equal(a.values, b.values)


def test_surface_statistics_under_refinement(surfaces):
    refocused, _ = surfaces
    coarse = refocused.values[::2, ::2]  # the 11x11 grid is a subset of 21x21
    fine = refocused.values
    assert abs(fine.min() - coarse.min()) < 0.005
    assert abs(fine.max() - coarse.max()) < 0.005


def test_default_surfaces(surfaces):
    refocused, unrefocused = surfaces
    assert refocused.values.shape == (21, 21)
    assert np.all((refocused.values >= 0) & (refocused.values <= 1))
    assert refocused.variation(0) < refocused.variation(1)
    assert refocused.values.min() > unrefocused.values.min()
    assert abs(refocused.values[10, 10] - unrefocused.values[10, 10]) < 0.02
    assert refocused.values.min() == pytest.approx(0.97951, abs=1e-4)


def test_unrefocused_minimum_in_bracket(surfaces):
    # measured minimum 2.7e-4: hyperfine phase over the shortened sequence drives the overlap to zero
    _, unrefocused = surfaces
    assert 0.05 <= unrefocused.values.min() <= 0.3


def test_lifetime_curves_small():
    cfg = SweepConfig(dt_count=3, te_list=(100.0, 1e6))
    s = sweep_lifetime(cfg)
    base = lifetime_baseline(cfg)
    assert s.header == ("te_us", "delta_t", "fidelity")
    assert np.all(s.values[0] <= s.values[1])
    assert np.all(np.abs(s.values[1] - base) < 0.01)


# ---------------------------------------------------------------- ensembles


def test_ensemble_single_sample_matches_point(reference, sweep_config):
    single = ensemble_average_fidelity(sweep_config, [(0.1, 0.01, 0.08, -0.02)], reference)
    assert single == pytest.approx(cphase_point(sweep_config, reference.unitary, 0.01, -0.02, False), abs=1e-15)


def test_ensemble_detuning_grid(reference, sweep_config):
    samples = detuning_grid([-0.1, 0.0, 0.1], [-0.1, 0.0, 0.1])
    assert len(samples) == 9
    value = ensemble_average_fidelity(sweep_config, samples, reference)
    # oracle: direct 9-dim integration of every sample at tol 1e-10
    assert value == pytest.approx(0.9994126, abs=1e-6)


def test_ensemble_symmetric_hyperfine_grid(reference, sweep_config):
    samples = [(0.1, dc, 0.08, dt) for dc in (-0.02, 0.02) for dt in (-0.02, 0.02)]
    value = ensemble_average_fidelity(sweep_config, samples, reference)
    best = max(cphase_point(sweep_config, reference.unitary, s[1], s[3], False) for s in samples)
    assert value <= best


def test_ensemble_requires_samples(reference, sweep_config):
    with pytest.raises(ValueError):
        ensemble_average_fidelity(sweep_config, [], reference)


# ---------------------------------------------------------------- leakage


def test_leakage_zero_hyperfine():
    scan = leakage_scan(LeakageConfig(delta_hf=0.0))
    assert np.all(scan.numeric < 1e-10) and np.all(scan.perturbative < 1e-10)


def test_leakage_scan_shape_and_agreement():
    scan = leakage_scan(LeakageConfig())
    assert scan.t_us.size >= 200 and scan.t_us[0] == 0 and scan.t_us[-1] == pytest.approx(1.5)
    assert scan.naive_bound == pytest.approx(0.045)
    assert abs(scan.final_perturbative - scan.final_numeric) / scan.final_numeric < 0.1


@pytest.mark.parametrize("addressed,alpha", [(1, 0.0), (0, 1.1)])
def test_leakage_same_for_either_bar_state(addressed, alpha):
    ref = leakage_scan(LeakageConfig())
    other = leakage_scan(LeakageConfig(addressed=addressed, alpha=alpha))
    assert other.final_numeric == pytest.approx(ref.final_numeric, rel=0.05)


def test_leakage_config_validation():
    with pytest.raises(ValueError):
        LeakageConfig(n_points=1)
    with pytest.raises(ValueError):
        LeakageConfig(addressed=2)
