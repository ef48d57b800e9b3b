import numpy as np
import pytest

from unitphysics.bench import (
    CSV_COLUMNS,
    BenchError,
    BenchRecord,
    l2_error,
    matched_grid,
    read_records,
    records_csv,
    reference_program,
    run_bench,
    run_program,
)
from unitphysics.reactor import Trajectory


def synthetic(t, T):
    n = len(t)
    return Trajectory(t=t, T=T, rho=1.0, p=np.full(n, 1e5), Y=np.ones((n, 1)), species=("A",))


def test_matched_grid_uses_common_times():
    a = np.array([0.0, 1.0, 2.0, 3.0])
    b = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0 * (1 + 1e-12)])
    ia, ib = matched_grid(a, b)
    assert ia.tolist() == [0, 1, 2, 3]
    assert ib.tolist() == [0, 2, 4, 6]
    # the coarser grid may be either argument
    ib2, ia2 = matched_grid(b, a)
    assert ia2.tolist() == ia.tolist() and ib2.tolist() == ib.tolist()


def test_matched_grid_skips_unmatched_times():
    ia, ib = matched_grid(np.array([0.0, 0.3, 1.0]), np.array([0.0, 0.25, 0.5, 0.75, 1.0]))
    assert ia.tolist() == [0, 2] and ib.tolist() == [0, 4]


def test_l2_error_brute_force():
    t_ref = np.linspace(0.0, 1.0, 11)
    T_ref = 1000.0 + 100.0 * t_ref
    cand = synthetic(t_ref[::2], T_ref[::2] + np.array([0, 1, 0, -2, 0, 0]))
    err, n = l2_error(cand, synthetic(t_ref, T_ref))
    ref = T_ref[::2]
    assert n == 6
    assert err == pytest.approx(np.sqrt(1 + 4) / np.sqrt(np.sum(ref**2)), rel=1e-14)
    assert l2_error(synthetic(t_ref, T_ref), synthetic(t_ref, T_ref))[0] == 0.0


def test_l2_error_needs_overlap():
    with pytest.raises(BenchError):
        l2_error(synthetic(np.array([0.1, 0.2]), np.ones(2)), synthetic(np.array([0.15, 0.25]), np.ones(2)))


def test_csv_roundtrip(tmp_path):
    recs = [BenchRecord("reference", 1300.0, "ok", 1.5, 1 << 27, 0.0, 1.1e-5, 2004),
            BenchRecord("cand", 1300.0, "failed", 0.1, 1 << 20, None, None, 0, "boom, with comma")]
    text = records_csv(recs)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    path = tmp_path / "b.csv"
    path.write_text(text)
    assert read_records(path) == recs


def test_csv_version_checked(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text(",".join(CSV_COLUMNS) + "\n99,x,1300.0,ok,1.0,1,,,0,\n")
    with pytest.raises(BenchError):
        read_records(path)


def test_run_program_measures_child(tmp_path):
    res = run_program(reference_program(), 2400.0, 101325.0, 1e-10, 1e-7, tmp_path / "r.jsonl")
    assert res.returncode == 0 and res.trajectory is not None
    assert res.wall_time > 0 and res.peak_rss > 10 * 2**20


def test_run_program_timeout(tmp_path):
    slow = tmp_path / "slow.py"
    slow.write_text("import time\ntime.sleep(30)\n")
    res = run_program(slow, 1300.0, 101325.0, 1e-10, 1e-7, tmp_path / "x.jsonl", timeout=0.5)
    assert res.returncode != 0 and res.trajectory is None and res.wall_time < 10


def test_self_comparison_is_exact(tmp_path):
    recs = run_bench(reference_program(), "self", [2300.0, 2400.0], t_end=1.5e-6, workdir=tmp_path, workers=2)
    assert [(r.label, r.T0) for r in recs] == [("reference", 2300.0), ("self", 2300.0),
                                              ("reference", 2400.0), ("self", 2400.0)]
    assert all(r.status == "ok" and r.l2_error == 0.0 and r.n_matched > 10 for r in recs)
    assert all(r.wall_time > 0 and r.peak_rss > 0 for r in recs)


def test_coarser_candidate_dt_increases_l2(tmp_path):
    errs = []
    for dt in (1e-9, 1.5e-9, 2e-9):
        recs = run_bench(reference_program(), f"dt{dt:g}", [1300.0], t_end=1.15e-5, candidate_dt=dt,
                         workdir=tmp_path)
        assert recs[1].status == "ok", recs[1].message
        errs.append(recs[1].l2_error)
    assert 0.0 < errs[0] < errs[1] < errs[2]


def test_failed_candidate_does_not_stop_the_sweep(tmp_path):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys\nsys.exit('no solver here')\n")
    recs = run_bench(bad, "bad", [2300.0, 2400.0], t_end=1e-7, workdir=tmp_path)
    failed = [r for r in recs if r.label == "bad"]
    assert [r.status for r in failed] == ["failed", "failed"]
    assert failed[0].message == "no solver here" and failed[0].l2_error is None


def test_reference_failure_is_an_error(tmp_path):
    bad = tmp_path / "bad.py"
    bad.write_text("raise SystemExit(3)\n")
    with pytest.raises(BenchError):
        run_bench(reference_program(), "c", [1300.0], t_end=1e-7, workdir=tmp_path, reference=bad)
