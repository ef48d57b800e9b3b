"""Isolated execution of candidate programs.

Each candidate is written to ``candidate.py`` in a fresh work directory
and run as a child process in its own session with a wall-clock timeout.
A ``sitecustomize`` audit hook is placed first on the child's path. It
refuses network connections, process spawning and file writes outside the
work directory and the shared JIT cache. Reads are allowed, so the program
can import installed libraries. The hook guards against accidents and is
not a security boundary against hostile code.
"""

from __future__ import annotations

import os
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .types import ExecOutcome

TIMEOUT_MARKER = "TIMEOUT"
DEFAULT_INSTALL = ("{python}", "-m", "pip", "install", "--no-input", "--target", "{site}", "{package}")

_GUARD = r'''
import os
import sys

_ALLOW = [os.path.realpath(p) for p in os.environ.get("UNITPHYSICS_SANDBOX_WRITE", "").split(os.pathsep) if p]
_NET = os.environ.get("UNITPHYSICS_SANDBOX_NETWORK") == "1"
_WRITE_FLAGS = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC
_PATH_EVENTS = {"os.remove", "os.rmdir", "os.mkdir", "os.rename", "os.replace", "os.truncate",
                "os.chmod", "os.chown", "os.symlink", "os.link", "shutil.rmtree", "shutil.copyfile",
                "shutil.move"}
_SPAWN = ("subprocess.Popen", "os.system", "os.exec", "os.posix_spawn", "os.spawn", "os.fork",
          "os.forkpty", "pty.spawn")
_NET_EVENTS = {"socket.connect", "socket.bind", "socket.sendto", "socket.sendmsg"}


def _inside(path):
    try:
        p = os.path.realpath(os.fsdecode(path))
    except (TypeError, ValueError):
        return True
    if p == os.devnull:
        return True
    return any(p == root or p.startswith(root + os.sep) for root in _ALLOW)


def _hook(event, args):
    if event == "open":
        path, mode, flags = args
        if isinstance(path, int):
            return
        writing = (isinstance(mode, str) and any(c in mode for c in "wax+")) or \
            (mode is None and isinstance(flags, int) and flags & _WRITE_FLAGS)
        if writing and not _inside(path):
            raise PermissionError(f"sandbox: write outside the work directory refused: {path}")
    elif event in _PATH_EVENTS:
        # a copy only reads its source
        for a in (args[1:2] if event == "shutil.copyfile" else args[:2]):
            if isinstance(a, (str, bytes, os.PathLike)) and not _inside(a):
                raise PermissionError(f"sandbox: {event} outside the work directory refused: {a}")
    elif event.startswith(_SPAWN):
        raise PermissionError(f"sandbox: process creation refused ({event})")
    elif event in _NET_EVENTS and not _NET:
        raise PermissionError(f"sandbox: network access refused ({event})")


sys.addaudithook(_hook)
'''


@dataclass
class SandboxConfig:
    timeout: float = 120.0
    network: bool = False
    root: str | None = None
    cache_dir: str | None = None
    allow_list: tuple[str, ...] = ()
    install_command: tuple[str, ...] = DEFAULT_INSTALL
    install_timeout: float = 600.0
    python: str = field(default_factory=lambda: sys.executable)
    env: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.timeout > 0:
            raise ValueError("sandbox timeout must be positive")
        self.allow_list = tuple(self.allow_list)
        self.install_command = tuple(self.install_command)
        if self.cache_dir is None:
            self.cache_dir = str(Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache"))
                                 / "unitphysics" / "numba")

    def root_dir(self) -> Path:
        if self.root is None:
            self.root = tempfile.mkdtemp(prefix="unitphysics-sandbox-")
        path = Path(self.root)
        path.mkdir(parents=True, exist_ok=True)
        return path


class SandboxError(RuntimeError):
    """The sandbox itself could not be prepared."""


def _guard_dir(root: Path) -> Path:
    d = root / "_guard"
    d.mkdir(exist_ok=True)
    f = d / "sitecustomize.py"
    if not f.exists() or f.read_text() != _GUARD:
        f.write_text(_GUARD)
    return d


def child_env(workdir: Path, config: SandboxConfig) -> dict[str, str]:
    root = workdir.parent
    site = workdir / "site"
    Path(config.cache_dir).mkdir(parents=True, exist_ok=True)
    tmp = workdir / "tmp"
    tmp.mkdir(exist_ok=True)
    env = {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": str(workdir),
        "LANG": "C.UTF-8",
        "PYTHONPATH": os.pathsep.join([str(_guard_dir(root)), str(site)]),
        "PYTHONDONTWRITEBYTECODE": "1",
        "PYTHONHASHSEED": "0",
        "PYTHONUNBUFFERED": "1",
        "TMPDIR": str(tmp),
        "MPLCONFIGDIR": str(tmp),
        "NUMBA_CACHE_DIR": str(config.cache_dir),
        "UNITPHYSICS_SANDBOX_WRITE": os.pathsep.join([str(workdir), str(config.cache_dir)]),
        "UNITPHYSICS_SANDBOX_NETWORK": "1" if config.network else "0",
    }
    env.update(config.env)
    return env


def prepare_workdir(config: SandboxConfig, name: str) -> Path:
    try:
        wd = config.root_dir() / name
        wd.mkdir(parents=True, exist_ok=False)
        (wd / "site").mkdir()
    except OSError as exc:
        raise SandboxError(f"cannot prepare sandbox directory {name}: {exc}") from exc
    return wd


def collect_evidence(workdir: Path) -> list[str]:
    files = sorted(p.name for p in workdir.glob("*.jsonl")) + sorted(p.name for p in workdir.glob("*.pair.json"))
    return files


def _run(cmd: Sequence[str], cwd: Path, env: dict, timeout: float) -> tuple[str, str, int | None, bool]:
    proc = subprocess.Popen(list(cmd), cwd=cwd, env=env, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                            stdin=subprocess.DEVNULL, start_new_session=True)
    try:
        out, err = proc.communicate(timeout=timeout)
        return out.decode(errors="replace"), err.decode(errors="replace"), proc.returncode, False
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        return out.decode(errors="replace"), err.decode(errors="replace"), proc.returncode, True


def execute(code: str, workdir: Path, config: SandboxConfig, tail: int = 4000) -> ExecOutcome:
    """Run ``code`` in ``workdir``; return ``(R, E)`` plus evidence files.

    On success ``E`` is empty. A nonzero exit gives the stderr tail and a
    timeout gives the ``TIMEOUT`` marker.
    """
    path = workdir / "candidate.py"
    path.write_text(code)
    env = child_env(workdir, config)
    t0 = time.perf_counter()
    out, err, rc, timed_out = _run([config.python, "candidate.py"], workdir, env, config.timeout)
    duration = time.perf_counter() - t0
    # keep logs free of the per-run temporary path
    out, err = out.replace(str(workdir), "."), err.replace(str(workdir), ".")
    if timed_out:
        E = f"{TIMEOUT_MARKER}: candidate exceeded {config.timeout:g} s wall-clock limit"
        R = out
    elif rc != 0:
        E = err[-tail:] or f"process exited with status {rc}"
        R = ""
    else:
        E = ""
        R = out
    return ExecOutcome(R=R, E=E, returncode=rc, timed_out=timed_out,
                       evidence=collect_evidence(workdir) if rc == 0 and not timed_out else [],
                       duration=duration)


def install(package: str, workdir: Path, config: SandboxConfig) -> dict:
    """Run the configured install command for ``package`` into the work directory."""
    mapping = {"python": config.python, "site": str(workdir / "site"), "package": package,
               "workdir": str(workdir)}
    cmd = [part.format(**mapping) for part in config.install_command]
    env = {k: v for k, v in os.environ.items() if k not in ("PYTHONPATH",)}
    try:
        out, err, rc, timed_out = _run(cmd, workdir, env, config.install_timeout)
    except OSError as exc:
        return {"action": "install", "package": package, "command": cmd, "returncode": None,
                "ok": False, "output": str(exc)}
    return {"action": "install", "package": package,
            "command": [c.replace(str(workdir), ".") for c in cmd],
            "returncode": rc, "ok": rc == 0 and not timed_out,
            "output": (out + err).replace(str(workdir), ".")[-1000:]}
