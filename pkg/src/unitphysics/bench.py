"""Time, memory and accuracy of a candidate reactor program against the reference.

Each sweep point runs in its own child process. Peak memory is the child's
maximum resident set size from ``os.wait4``; the L2 error is the relative
L2 norm of ``T`` over the time grid shared by both trajectories.
"""

from __future__ import annotations

import csv
import io
import os
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .reactor import NoIgnitionError, Trajectory, detect_idt

CSV_VERSION = 1
CSV_COLUMNS = ["version", "label", "T0", "status", "wall_time_s", "peak_rss_bytes", "l2_error", "idt_s",
               "n_matched", "message"]
DEFAULT_SWEEP = tuple(float(T) for T in range(1300, 2401, 100))


def reference_program() -> Path:
    return Path(__file__).with_name("bench_reference.py")


class BenchError(RuntimeError):
    pass


@dataclass
class BenchRecord:
    label: str
    T0: float
    status: str  # ok | failed
    wall_time: float
    peak_rss: int
    l2_error: float | None
    idt: float | None
    n_matched: int = 0
    message: str = ""

    def row(self) -> list:
        def num(x):
            return "" if x is None else repr(float(x))
        return [CSV_VERSION, self.label, repr(self.T0), self.status, repr(self.wall_time), self.peak_rss,
                num(self.l2_error), num(self.idt), self.n_matched, self.message]


@dataclass
class RunResult:
    returncode: int
    wall_time: float
    peak_rss: int
    stderr: str
    trajectory: Trajectory | None


def _command(program: Path, python: str) -> list[str]:
    program = Path(program)
    return [python, str(program)] if program.suffix == ".py" else [str(program)]


def run_program(program: str | Path, T0: float, p0: float, dt: float, t_end: float, out: Path,
                timeout: float = 1800.0, python: str = sys.executable) -> RunResult:
    """Run one program as a child process and read back its trajectory."""
    cmd = _command(Path(program), python) + ["--T0", repr(T0), "--p0", repr(p0), "--dt", repr(dt),
                                             "--t-end", repr(t_end), "--out", str(out)]
    t0 = time.perf_counter()
    proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    deadline = t0 + timeout
    err_chunks = []
    # os.wait4 reports the child's own peak RSS; stderr is drained on a thread
    import threading

    reader = threading.Thread(target=lambda: err_chunks.append(proc.stderr.read()), daemon=True)
    reader.start()
    status, rusage = None, None
    while status is None:
        pid, st, ru = os.wait4(proc.pid, os.WNOHANG)
        if pid:
            status, rusage = st, ru
            break
        if time.perf_counter() > deadline:
            proc.kill()
            _, status, rusage = os.wait4(proc.pid, 0)
            break
        time.sleep(0.01)
    wall = time.perf_counter() - t0
    proc.returncode = os.waitstatus_to_exitcode(status)
    reader.join(5)
    stderr = (err_chunks[0] if err_chunks else b"").decode(errors="replace")
    peak = int(rusage.ru_maxrss) * 1024  # kilobytes on Linux
    traj = None
    if proc.returncode == 0:
        try:
            traj = Trajectory.read(out)
        except (OSError, ValueError) as exc:
            stderr += f"\ncannot read trajectory: {exc}"
    return RunResult(proc.returncode, wall, peak, stderr, traj)


def matched_grid(a: np.ndarray, b: np.ndarray, rtol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Indices of times present in both grids, taken on the coarser one."""
    coarse, fine, swap = (a, b, False) if len(a) <= len(b) else (b, a, True)
    scale = max(abs(float(fine[-1])), 1e-300)
    j = np.clip(np.searchsorted(fine, coarse), 0, len(fine) - 1)
    jm = np.clip(j - 1, 0, len(fine) - 1)
    pick = np.where(np.abs(fine[jm] - coarse) < np.abs(fine[j] - coarse), jm, j)
    ok = np.abs(fine[pick] - coarse) <= rtol * scale
    ic, jf = np.nonzero(ok)[0], pick[ok]
    return (jf, ic) if swap else (ic, jf)


def l2_error(candidate: Trajectory, reference: Trajectory) -> tuple[float, int]:
    """Relative L2 norm of the candidate temperature error on the common grid."""
    ic, ir = matched_grid(candidate.t, reference.t)
    if len(ic) < 2:
        raise BenchError("trajectories share fewer than two sample times")
    ref = reference.T[ir]
    return float(np.linalg.norm(candidate.T[ic] - ref) / np.linalg.norm(ref)), int(len(ic))


def _idt(traj: Trajectory) -> float | None:
    try:
        return detect_idt(traj)
    except (NoIgnitionError, ValueError):
        return None


def run_bench(candidate: str | Path, label: str = "candidate", T0s: Sequence[float] = DEFAULT_SWEEP,
              p0: float = 101325.0, dt: float = 1e-10, t_end: float = 2e-5, candidate_dt: float | None = None,
              workers: int = 1, workdir: str | Path | None = None, timeout: float = 1800.0,
              reference: str | Path | None = None) -> list[BenchRecord]:
    """Reference and candidate records for every ``T0``, reference first per point."""
    reference = Path(reference) if reference is not None else reference_program()
    root = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="unitphysics-bench-"))
    root.mkdir(parents=True, exist_ok=True)
    cdt = dt if candidate_dt is None else candidate_dt

    def point(T0: float) -> list[BenchRecord]:
        ref = run_program(reference, T0, p0, dt, t_end, root / f"reference_{T0:g}.jsonl", timeout)
        if ref.trajectory is None:
            raise BenchError(f"reference run failed at T0={T0:g}: {ref.stderr.strip()[-500:]}")
        rec_ref = BenchRecord("reference", T0, "ok", ref.wall_time, ref.peak_rss, 0.0, _idt(ref.trajectory),
                              len(ref.trajectory))
        cand = run_program(candidate, T0, p0, cdt, t_end, root / f"{label}_{T0:g}.jsonl", timeout)
        if cand.trajectory is None:
            last = cand.stderr.strip().splitlines()[-1:] or [f"exit status {cand.returncode}"]
            return [rec_ref, BenchRecord(label, T0, "failed", cand.wall_time, cand.peak_rss, None, None, 0,
                                         last[0][:300])]
        try:
            err, n = l2_error(cand.trajectory, ref.trajectory)
        except BenchError as exc:
            return [rec_ref, BenchRecord(label, T0, "failed", cand.wall_time, cand.peak_rss, None,
                                         _idt(cand.trajectory), 0, str(exc))]
        return [rec_ref, BenchRecord(label, T0, "ok", cand.wall_time, cand.peak_rss, err, _idt(cand.trajectory),
                                     n)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(point, T0s))
    else:
        groups = [point(T0) for T0 in T0s]
    return [r for g in groups for r in g]


def records_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_records(path: str | Path) -> list[BenchRecord]:
    rows = list(csv.DictReader(Path(path).read_text().splitlines()))
    out = []
    for row in rows:
        if int(row["version"]) != CSV_VERSION:
            raise BenchError(f"unsupported bench CSV version {row['version']}")
        def opt(k):
            return float(row[k]) if row[k] else None
        out.append(BenchRecord(row["label"], float(row["T0"]), row["status"], float(row["wall_time_s"]),
                               int(row["peak_rss_bytes"]), opt("l2_error"), opt("idt_s"), int(row["n_matched"]),
                               row["message"]))
    return out


def plot_svg(records: Sequence[BenchRecord], path: str | Path) -> None:
    """Three panels: wall time, peak memory and L2 error against T0."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = list(dict.fromkeys(r.label for r in records))
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    panels = [("wall_time", "wall time [s]"), ("peak_rss", "peak memory [MiB]"), ("l2_error", "L2 error of T [-]")]
    for ax, (attr, title) in zip(axes, panels):
        for lab in labels:
            pts = [(r.T0, getattr(r, attr)) for r in records if r.label == lab and r.status == "ok"
                   and getattr(r, attr) is not None]
            if attr == "l2_error" and lab == "reference":
                continue
            if pts:
                x, y = zip(*pts)
                if attr == "peak_rss":
                    y = [v / 2**20 for v in y]
                ax.plot(x, y, marker="o", label=lab)
        ax.set_xlabel("T0 [K]")
        ax.set_title(title)
        ax.grid(alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def as_dicts(records: Sequence[BenchRecord]) -> list[dict]:
    return [asdict(r) for r in records]
