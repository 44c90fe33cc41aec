"""Batched execution of independent airfoil problems.

Three execution modes share the same per-problem kernels, so results are
bitwise identical whichever mode runs them:

* ``run_sequential``: assemble everything, then solve everything.
* ``run_pipelined``: the batch is cut into slices that flow through
  assembly -> transfer -> solve stages connected by bounded queues, so one
  slice's solve overlaps the next slice's assembly and copy.
* ``run_split``: a fraction of the batch goes through the pipeline while the
  rest is assembled and solved end to end by a secondary pool.

Every run returns a :class:`TimingReport`. Overhead is ``O = W - critical_path``:
for the sequential mode the critical path is the sum of all stage times; for
the overlapped modes it is the busiest single stage.
"""
from __future__ import annotations

import io
import os
import queue
import statistics
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EmptyWorkload, PanelError
from .geometry import Airfoil, BsplineGenome, from_bspline
from .panel_core import FlowCondition, FlowSolution, PanelSystem, assemble, lu_solve, surface_quantities
from .viscous import DragResult, viscous_drag

BENCH_COLUMNS = ("mode", "slices", "split", "W_s", "A_s", "L_s", "O_s", "speedup")
OVERHEAD_NOTE = "O = W - critical path (sequential: sum of stages; overlapped: busiest stage)"

_DONE = object()


@dataclass(frozen=True)
class Problem:
    """One airfoil at one flow condition. ``shape`` is an Airfoil or a genome built with ``panels`` panels."""

    shape: Union[Airfoil, BsplineGenome]
    flow: FlowCondition = FlowCondition()
    Re: Optional[float] = None
    panels: int = 200

    def airfoil(self) -> Airfoil:
        if isinstance(self.shape, Airfoil):
            return self.shape
        return from_bspline(self.shape, self.panels)


@dataclass
class Workload:
    problems: list

    def __post_init__(self):
        self.problems = list(self.problems)
        if not self.problems:
            raise EmptyWorkload("workload has no problems")

    def __len__(self):
        return len(self.problems)

    @property
    def m(self) -> int:
        return len(self.problems)


@dataclass
class ProblemResult:
    index: int
    solution: Optional[FlowSolution] = None
    cl: float = float("nan")
    drag: Optional[DragResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def cd(self) -> float:
        return self.drag.cd if self.drag is not None else float("nan")

    def same_as(self, other: "ProblemResult") -> bool:
        """Bitwise equality of everything the kernels computed."""
        if self.index != other.index or self.error != other.error:
            return False
        if (self.solution is None) != (other.solution is None):
            return False
        if self.solution is not None:
            if self.solution.gamma.tobytes() != other.solution.gamma.tobytes():
                return False
            if np.float64(self.solution.C).tobytes() != np.float64(other.solution.C).tobytes():
                return False
        return np.float64(self.cl).tobytes() == np.float64(other.cl).tobytes() and self.drag == other.drag


@dataclass(frozen=True)
class PipelineConfig:
    num_slices: int = 10
    assembly_workers: int = 1
    solver_workers: int = 1
    split_fraction: float = 1.0
    transfer_bytes_per_sec: float = 0.0
    queue_capacity: int = 2
    secondary_workers: int = 1

    def __post_init__(self):
        for name in ("num_slices", "assembly_workers", "solver_workers", "queue_capacity", "secondary_workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.split_fraction <= 1.0:
            raise ValueError("split_fraction must lie in [0, 1]")
        if self.transfer_bytes_per_sec < 0.0:
            raise ValueError("transfer_bytes_per_sec must be >= 0 (0 means unlimited)")

    @classmethod
    def from_env(cls, **overrides) -> "PipelineConfig":
        """Pool sizes may be pinned with PANELOPT_ASSEMBLY_WORKERS / PANELOPT_SOLVER_WORKERS / PANELOPT_SECONDARY_WORKERS."""
        env = {}
        for key in ("assembly_workers", "solver_workers", "secondary_workers"):
            raw = os.environ.get(f"PANELOPT_{key.upper()}")
            if raw:
                env[key] = int(raw)
        env.update(overrides)
        return cls(**env)


@dataclass
class Slice:
    index: int
    start: int
    stop: int
    assembled_at: float = float("nan")
    transferred_at: float = float("nan")
    solved_at: float = float("nan")

    def __len__(self):
        return self.stop - self.start


@dataclass
class TimingReport:
    mode: str
    W: float
    A: float
    L: float
    T: float = 0.0
    P: float = 0.0
    critical_path: float = 0.0
    slices: list = field(default_factory=list)
    split: float = 1.0
    speedup: float = float("nan")

    @property
    def O(self) -> float:
        return max(0.0, self.W - self.critical_path)

    @property
    def num_slices(self) -> int:
        return len(self.slices)


def partition(m: int, num_slices: int) -> list[Slice]:
    """Contiguous slices whose sizes differ by at most one."""
    if not 1 <= num_slices <= m:
        raise ValueError(f"num_slices must lie in [1, {m}], got {num_slices}")
    base, extra = divmod(m, num_slices)
    out, start = [], 0
    for k in range(num_slices):
        size = base + (1 if k < extra else 0)
        out.append(Slice(k, start, start + size))
        start += size
    return out


# -- per-problem kernels ------------------------------------------------------


@dataclass
class _Pending:
    index: int
    problem: Problem
    airfoil: Optional[Airfoil] = None
    system: Optional[PanelSystem] = None
    solution: Optional[FlowSolution] = None
    error: Optional[str] = None


def _assemble_one(index: int, problem: Problem) -> _Pending:
    item = _Pending(index, problem)
    try:
        item.airfoil = problem.airfoil()
        item.system = assemble(item.airfoil, problem.flow)
    except PanelError as exc:
        item.error = f"{type(exc).__name__}: {exc}"
    return item


def _solve_one(item: _Pending) -> _Pending:
    if item.error is None:
        try:
            item.solution = lu_solve(item.system)
        except PanelError as exc:
            item.error = f"{type(exc).__name__}: {exc}"
        item.system = None
    return item


def _post_one(item: _Pending) -> ProblemResult:
    if item.error is not None:
        return ProblemResult(item.index, error=item.error)
    prob = item.problem
    sq = surface_quantities(item.solution, item.airfoil, prob.flow)
    result = ProblemResult(item.index, item.solution, sq.cl)
    if prob.Re is not None:
        try:
            result.drag = viscous_drag(item.solution, item.airfoil, prob.flow, prob.Re).drag
        except PanelError as exc:
            result.error = f"{type(exc).__name__}: {exc}"
    return result


def evaluate_problem(problem: Problem, index: int = 0) -> ProblemResult:
    """Run one problem through the same kernels the batch modes use."""
    return _post_one(_solve_one(_assemble_one(index, problem)))


def _transfer(items: list[_Pending], bytes_per_sec: float) -> list[_Pending]:
    """Copy every matrix as a device upload would, throttled to the modeled bandwidth."""
    t0 = time.perf_counter()
    nbytes = 0
    for item in items:
        if item.system is not None:
            item.system = item.system.copy()
            nbytes += item.system.nbytes
    if bytes_per_sec > 0.0:
        remaining = nbytes / bytes_per_sec - (time.perf_counter() - t0)
        if remaining > 0.0:
            time.sleep(remaining)
    return items


class _ParallelFor:
    """Order-preserving map over a fixed-size thread pool; inline when size is 1."""

    def __init__(self, workers: int):
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def map(self, fn, *iterables):
        if self.pool is None:
            return list(map(fn, *iterables))
        return list(self.pool.map(fn, *iterables))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


@contextmanager
def _pools(*sizes):
    pools = [_ParallelFor(n) for n in sizes]
    try:
        with threadpool_limits(limits=1, user_api="blas"):
            yield pools
    finally:
        for p in pools:
            p.close()


# -- execution modes ---------------------------------------------------------


def run_sequential(workload: Workload, n_threads: int = 1):
    """Assemble all problems, then solve all, then post-process all."""
    probs = workload.problems
    with _pools(n_threads) as (pool,):
        t0 = time.perf_counter()
        items = pool.map(_assemble_one, range(len(probs)), probs)
        t1 = time.perf_counter()
        items = pool.map(_solve_one, items)
        t2 = time.perf_counter()
        results = pool.map(_post_one, items)
        t3 = time.perf_counter()
    report = TimingReport("sequential", W=t3 - t0, A=t1 - t0, L=t2 - t1, P=t3 - t2, critical_path=t3 - t0)
    return results, report


@dataclass
class _StageClock:
    busy: float = 0.0

    @contextmanager
    def timed(self):
        t = time.perf_counter()
        try:
            yield
        finally:
            self.busy += time.perf_counter() - t


def _pipeline(problems, offset, slices, config, results, t0, clocks, failures):
    """Run the three-stage slice pipeline; writes into ``results[offset + i]``."""
    asm_pool = _ParallelFor(config.assembly_workers)
    sol_pool = _ParallelFor(config.solver_workers)
    q_asm = queue.Queue(maxsize=config.queue_capacity)
    q_xfer = queue.Queue(maxsize=config.queue_capacity)
    ca, ct, cl, cp = clocks

    def assembly_stage():
        try:
            for sl in slices:
                if failures:
                    break
                with ca.timed():
                    idx = range(sl.start, sl.stop)
                    items = asm_pool.map(_assemble_one, [offset + i for i in idx], [problems[i] for i in idx])
                sl.assembled_at = time.perf_counter() - t0
                q_asm.put((sl, items))
        except BaseException as exc:
            failures.append(exc)
        finally:
            q_asm.put(_DONE)

    def transfer_stage():
        try:
            for sl, items in iter(q_asm.get, _DONE):
                if failures:
                    continue
                with ct.timed():
                    items = _transfer(items, config.transfer_bytes_per_sec)
                sl.transferred_at = time.perf_counter() - t0
                q_xfer.put((sl, items))
        except BaseException as exc:
            failures.append(exc)
            for _ in iter(q_asm.get, _DONE):
                pass
        finally:
            q_xfer.put(_DONE)

    def solve_stage():
        try:
            for sl, items in iter(q_xfer.get, _DONE):
                if failures:
                    continue
                with cl.timed():
                    items = sol_pool.map(_solve_one, items)
                with cp.timed():
                    for res in sol_pool.map(_post_one, items):
                        results[res.index] = res
                sl.solved_at = time.perf_counter() - t0
        except BaseException as exc:
            failures.append(exc)
            for _ in iter(q_xfer.get, _DONE):
                pass

    threads = [threading.Thread(target=f, daemon=True) for f in (assembly_stage, transfer_stage, solve_stage)]
    try:
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    finally:
        asm_pool.close()
        sol_pool.close()


def _check_complete(results, m):
    missing = [i for i, r in enumerate(results) if r is None]
    if missing or len(results) != m:
        raise RuntimeError(f"pipeline lost problems: {missing[:10]}")


def run_pipelined(workload: Workload, config: PipelineConfig = PipelineConfig()):
    m = len(workload)
    slices = partition(m, min(config.num_slices, m))
    results = [None] * m
    clocks = [_StageClock() for _ in range(4)]
    failures: list = []
    with threadpool_limits(limits=1, user_api="blas"):
        t0 = time.perf_counter()
        _pipeline(workload.problems, 0, slices, config, results, t0, clocks, failures)
        W = time.perf_counter() - t0
    if failures:
        raise failures[0]
    _check_complete(results, m)
    ca, ct, cl, cp = clocks
    crit = max(ca.busy, ct.busy, cl.busy + cp.busy)
    report = TimingReport("pipelined", W=W, A=ca.busy, L=cl.busy, T=ct.busy, P=cp.busy, critical_path=crit, slices=slices)
    return results, report


def run_split(workload: Workload, config: PipelineConfig):
    """Pipeline the first ``split_fraction`` of the batch; a secondary pool handles the rest end to end."""
    f = config.split_fraction
    if not 0.0 < f <= 1.0:
        raise ValueError(f"split_fraction must lie in (0, 1], got {f}")
    m = len(workload)
    m_main = max(1, min(m, int(round(f * m))))
    main = workload.problems[:m_main]
    rest = workload.problems[m_main:]
    slices = partition(m_main, min(config.num_slices, m_main))
    results = [None] * m
    clocks = [_StageClock() for _ in range(4)]
    sec = [_StageClock() for _ in range(3)]
    failures: list = []

    def secondary():
        try:
            if not rest:
                return
            pool = _ParallelFor(config.secondary_workers)
            try:
                with sec[0].timed():
                    items = pool.map(_assemble_one, range(m_main, m), rest)
                with sec[1].timed():
                    items = pool.map(_solve_one, items)
                with sec[2].timed():
                    for res in pool.map(_post_one, items):
                        results[res.index] = res
            finally:
                pool.close()
        except BaseException as exc:
            failures.append(exc)

    with threadpool_limits(limits=1, user_api="blas"):
        t0 = time.perf_counter()
        side = threading.Thread(target=secondary, daemon=True)
        side.start()
        _pipeline(main, 0, slices, config, results, t0, clocks, failures)
        side.join()
        W = time.perf_counter() - t0
    if failures:
        raise failures[0]
    _check_complete(results, m)
    ca, ct, cl, cp = clocks
    sec_busy = sum(c.busy for c in sec)
    crit = max(ca.busy, ct.busy, cl.busy + cp.busy, sec_busy)
    report = TimingReport(
        "split",
        W=W,
        A=ca.busy + sec[0].busy,
        L=cl.busy + sec[1].busy,
        T=ct.busy,
        P=cp.busy + sec[2].busy,
        critical_path=crit,
        slices=slices,
        split=f,
    )
    return results, report


# -- benchmarking ------------------------------------------------------------


@dataclass
class BenchRow:
    mode: str
    slices: int
    split: float
    W: float
    A: float
    L: float
    O: float
    speedup: float
    runs: list = field(default_factory=list)


def _median_row(mode, slices, split, reports, baseline_W):
    W = statistics.median(r.W for r in reports)
    return BenchRow(
        mode,
        slices,
        split,
        W,
        statistics.median(r.A for r in reports),
        statistics.median(r.L for r in reports),
        statistics.median(r.O for r in reports),
        baseline_W / W if W > 0 else float("nan"),
        list(reports),
    )


def bench_sweep(workload, slice_list, split_list=(), repetitions: int = 3, config: Optional[PipelineConfig] = None):
    """Median timings for each slice count (pipelined) and split fraction (split mode).

    Split rows use ``config.num_slices`` slices on the main path. The speedup
    baseline is ``run_sequential`` with ``config.assembly_workers`` threads.
    """
    if workload is None or len(workload) == 0:
        raise EmptyWorkload("workload has no problems")
    slice_list = list(slice_list)
    split_list = list(split_list)
    if not slice_list and not split_list:
        raise ValueError("nothing to sweep: slice and split lists are both empty")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    config = config or PipelineConfig()
    m = len(workload)
    if any(s < 1 or s > m for s in slice_list):
        raise ValueError(f"slice counts must lie in [1, {m}]")
    if any(not 0.0 < f <= 1.0 for f in split_list):
        raise ValueError("split fractions must lie in (0, 1]")

    base = [run_sequential(workload, config.assembly_workers)[1] for _ in range(repetitions)]
    base_W = statistics.median(r.W for r in base)

    rows = []
    for s in slice_list:
        cfg = replace(config, num_slices=s, split_fraction=1.0)
        reps = [run_pipelined(workload, cfg)[1] for _ in range(repetitions)]
        rows.append(_median_row("pipelined", s, 1.0, reps, base_W))
    for f in split_list:
        cfg = replace(config, split_fraction=f)
        reps = [run_split(workload, cfg)[1] for _ in range(repetitions)]
        rows.append(_median_row("split", cfg.num_slices, f, reps, base_W))
    return rows


def bench_csv(rows) -> str:
    out = io.StringIO()
    out.write(",".join(BENCH_COLUMNS) + "\n")
    for r in rows:
        out.write(f"{r.mode},{r.slices},{r.split:.2f},{r.W:.6f},{r.A:.6f},{r.L:.6f},{r.O:.6f},{r.speedup:.4f}\n")
    return out.getvalue()


def report_csv(reports) -> str:
    """Single runs in the bench schema (speedup left empty unless set)."""
    out = io.StringIO()
    out.write(",".join(BENCH_COLUMNS) + "\n")
    for r in reports:
        out.write(
            f"{r.mode},{max(1, r.num_slices)},{r.split:.2f},{r.W:.6f},{r.A:.6f},{r.L:.6f},{r.O:.6f},{r.speedup:.4f}\n"
        )
    return out.getvalue()


def format_table(rows) -> str:
    lines = [OVERHEAD_NOTE, f"{'mode':<10} {'slices':>6} {'split':>6} {'W':>9} {'A':>9} {'L':>9} {'O':>9} {'speedup':>8}"]
    for r in rows:
        lines.append(
            f"{r.mode:<10} {r.slices:>6d} {r.split:>6.2f} {r.W:>9.4f} {r.A:>9.4f} {r.L:>9.4f} {r.O:>9.4f} {r.speedup:>8.3f}"
        )
    return "\n".join(lines)
