"""Plan files, benchmark suites and IPC scoring."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing as mp
import resource
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .hddl import load
from .heuristics import HeuristicWeights
from .model import GOAL_NAME, INIT_NAME, GroundProblem, task_name
from .plan import iter_snap_times
from .search import SearchConfig, SearchResult, SearchStats, htep
from .tpn import DEFAULT_EPSILON
from .validate import Verdict, check_timeline

log = logging.getLogger(__name__)


# plan files -------------------------------------------------------------------


class PlanFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def format_time(t: Fraction) -> str:
    """Exact decimal when one exists, ``p/q`` otherwise."""
    t = Fraction(t)
    d = t.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{t.numerator}/{t.denominator}"
    digits = max(twos, fives)
    if digits == 0:
        return str(t.numerator)
    scaled = abs(t.numerator) * 10**digits // t.denominator
    sign = "-" if t < 0 else ""
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


def parse_time(text: str) -> Fraction:
    return Fraction(text)


@dataclass(frozen=True)
class PlanFile:
    """What a plan file records: ε, makespan and timestamped snap actions."""

    epsilon: Fraction = DEFAULT_EPSILON
    makespan: Fraction = Fraction(0)
    steps: tuple = ()  # ((time, TaskName), ...) sorted by time then name


def plan_file(result: SearchResult) -> PlanFile:
    """Timestamped snap actions of a solved search result, sentinels dropped."""
    if not result.solved:
        raise ValueError("no plan to emit")
    steps = [
        (t, action.name)
        for t, _, action in iter_snap_times(result.plan, result.schedule)
        if action.name not in (INIT_NAME, GOAL_NAME)
    ]
    steps.sort(key=lambda s: (s[0], str(s[1])))
    return PlanFile(result.schedule.epsilon, max((t for t, _ in steps), default=Fraction(0)), tuple(steps))


def emit_plan(plan: PlanFile, out: io.TextIOBase | None = None) -> str:
    lines = [f";; epsilon = {plan.epsilon}", f";; makespan = {format_time(plan.makespan)}"]
    lines += [f"{format_time(t)}: {name}" for t, name in plan.steps]
    text = "\n".join(lines) + "\n"
    if out is not None:
        out.write(text)
    return text


def parse_plan(text: str) -> PlanFile:
    epsilon, makespan = DEFAULT_EPSILON, None
    steps = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(";;"):
            key, sep, value = line[2:].partition("=")
            key = key.strip()
            try:
                if key == "epsilon":
                    epsilon = Fraction(value.strip())
                elif key == "makespan":
                    makespan = Fraction(value.strip())
            except ValueError:
                raise PlanFormatError(f"bad number in header {line!r}", n) from None
            continue
        if line.startswith(";"):
            continue
        stamp, sep, rest = line.partition(":")
        rest = rest.strip()
        if not sep or not (rest.startswith("(") and rest.endswith(")")):
            raise PlanFormatError(f"expected '<time>: (<name> <args>...)', got {raw!r}", n)
        try:
            t = parse_time(stamp.strip())
        except (ValueError, ZeroDivisionError):
            raise PlanFormatError(f"bad timestamp {stamp.strip()!r}", n) from None
        parts = rest[1:-1].lower().split()
        if not parts or any(c in p for p in parts for c in "()"):
            raise PlanFormatError(f"malformed action {rest!r}", n)
        steps.append((t, task_name(parts[0], *parts[1:])))
    steps.sort(key=lambda s: (s[0], str(s[1])))
    if makespan is None:
        makespan = max((t for t, _ in steps), default=Fraction(0))
    return PlanFile(epsilon, makespan, tuple(steps))


def validate_plan_file(problem: GroundProblem, plan: PlanFile) -> Verdict:
    """Timeline check of a plan file against the ground problem."""
    verdict = check_timeline(problem, plan.steps)
    latest = max((t for t, _ in plan.steps), default=Fraction(0))
    if plan.makespan != latest:
        verdict.add("constraint-violation", f"header makespan {plan.makespan} but last step at {latest}")
    return verdict


# suites ------------------------------------------------------------------------------


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    id: str
    domain: str  # suite/domain name
    domain_file: Path
    problem_file: Path


def read_manifest(path) -> list[Instance]:
    """JSON manifest: ``{"instances": [{"id", "domain", "domain_file", "problem_file"}]}``.

    Paths are relative to the manifest.  Every file must exist.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    out = []
    for entry in data.get("instances", []):
        try:
            inst = Instance(
                entry["id"],
                entry["domain"],
                path.parent / entry["domain_file"],
                path.parent / entry["problem_file"],
            )
        except KeyError as exc:
            raise ManifestError(f"manifest entry {entry!r} lacks {exc}") from None
        for f in (inst.domain_file, inst.problem_file):
            if not f.is_file():
                raise ManifestError(f"{inst.id}: missing file {f}")
        out.append(inst)
    if not out:
        raise ManifestError(f"manifest {path} lists no instances")
    return out


DEFAULT_CONFIGS = (
    SearchConfig(heuristic="tdgm", flaw_strategy="fape"),
    SearchConfig(heuristic="f_tc", flaw_strategy="fape"),
    SearchConfig(heuristic="fape", flaw_strategy="fape"),
)


def read_configs(path) -> list[SearchConfig]:
    """JSON list of objects with SearchConfig field names."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    out = []
    for item in data:
        item = dict(item)
        if "weights" in item:
            item["weights"] = HeuristicWeights(**item["weights"])
        if "epsilon" in item:
            item["epsilon"] = Fraction(str(item["epsilon"]))
        out.append(SearchConfig(**item))
    return out


@dataclass
class RunRecord:
    instance: str
    domain: str
    config: str
    outcome: str
    wall_time: float
    makespan: Fraction | None
    stats: SearchStats
    valid: bool | None = None
    plan_text: str = ""

    def __post_init__(self):
        if (self.makespan is not None) != (self.outcome == "solved"):
            raise ValueError("makespan must be present exactly when solved")


def _run_one(inst: Instance, config: SearchConfig) -> RunRecord:
    started = time.monotonic()
    problem = load(inst.domain_file, inst.problem_file)
    result = htep(problem, config)
    wall = time.monotonic() - started
    makespan = valid = None
    text = ""
    if result.solved:
        pf = plan_file(result)
        text = emit_plan(pf)
        # re-read the emitted text, so the file format is what gets validated
        valid = validate_plan_file(problem, parse_plan(text)).accepted
        makespan = pf.makespan
    return RunRecord(inst.id, inst.domain, config.name, result.stats.outcome, wall, makespan, result.stats, valid, text)


def _child(conn, inst: Instance, config: SearchConfig) -> None:
    limit = (config.memory_budget_mb + 512) * 1024 * 1024
    try:
        resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
    except (ValueError, OSError):
        pass
    try:
        conn.send(_run_one(inst, config))
    except MemoryError:
        conn.send("memory")
    finally:
        conn.close()


def run_isolated(inst: Instance, config: SearchConfig, grace: float = 5.0) -> RunRecord:
    """One run in a fresh process; overruns are killed and reported."""
    ctx = mp.get_context("fork")
    recv, send = ctx.Pipe(duplex=False)
    started = time.monotonic()
    proc = ctx.Process(target=_child, args=(send, inst, config), daemon=True)
    proc.start()
    send.close()
    got = None
    if recv.poll(config.time_budget + grace):
        try:
            got = recv.recv()
        except EOFError:
            got = None
    proc.join(grace)
    if proc.is_alive():
        proc.kill()
        proc.join()
    wall = time.monotonic() - started
    if isinstance(got, RunRecord):
        return got
    outcome = "memory" if got == "memory" or (got is None and proc.exitcode not in (0, None) and wall < config.time_budget) else "timeout"
    return RunRecord(inst.id, inst.domain, config.name, outcome, wall, None, SearchStats(outcome=outcome))


def run_suite(
    instances: Sequence[Instance],
    configs: Sequence[SearchConfig] = DEFAULT_CONFIGS,
    isolate: bool = True,
) -> list[RunRecord]:
    """One record per (instance, configuration), in manifest order."""
    records = []
    for inst in instances:
        for config in configs:
            rec = run_isolated(inst, config) if isolate else _run_one(inst, config)
            log.info("%s %s: %s", inst.id, config.name, rec.outcome)
            records.append(rec)
    return records


# scoring -----------------------------------------------------------------------------------


@dataclass
class IpcScores:
    time: dict[str, float] = field(default_factory=dict)
    quality: dict[str, float] = field(default_factory=dict)
    # (instance, config) -> (time score, quality score)
    per_instance: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    domain_of: dict[str, str] = field(default_factory=dict)

    def by_domain(self) -> dict[str, dict[str, tuple[float, float]]]:
        """domain -> config -> (time score, quality score) summed over instances."""
        out: dict[str, dict[str, tuple[float, float]]] = {}
        for (inst, config), (ts, qs) in self.per_instance.items():
            row = out.setdefault(self.domain_of[inst], {})
            t, q = row.get(config, (0.0, 0.0))
            row[config] = (t + ts, q + qs)
        return out


def time_score(t: float, best: float) -> float:
    if t <= 1.0:
        return 1.0
    return 1.0 / (1.0 + math.log10(t / best))


def ipc_scores(records: Iterable[RunRecord]) -> IpcScores:
    """Agile time score and makespan quality score per configuration.

    Quality is Q*/Q with Q* the smallest makespan found for the instance;
    a zero Q* scores every zero-makespan solution 1.  Unsolved runs score 0.
    """
    records = list(records)
    scores = IpcScores()
    configs = list(dict.fromkeys(r.config for r in records))
    for c in configs:
        scores.time[c] = scores.quality[c] = 0.0
    by_inst: dict[str, list[RunRecord]] = {}
    for r in records:
        by_inst.setdefault(r.instance, []).append(r)
        scores.domain_of[r.instance] = r.domain
    for inst, runs in by_inst.items():
        solved = [r for r in runs if r.outcome == "solved" and r.valid is not False]
        solved_ids = {id(r) for r in solved}
        best_t = min((r.wall_time for r in solved), default=None)
        best_q = min((r.makespan for r in solved), default=None)
        for r in runs:
            if id(r) in solved_ids:
                ts = time_score(r.wall_time, best_t)
                qs = 1.0 if r.makespan == 0 else float(best_q / r.makespan)
            else:
                ts = qs = 0.0
            scores.per_instance[(inst, r.config)] = (ts, qs)
            scores.time[r.config] += ts
            scores.quality[r.config] += qs
    return scores


# output ----------------------------------------------------------------------------------

CSV_HEADER = (
    "instance", "domain", "config", "outcome", "makespan", "expanded", "generated",
    "qualitative_dead_ends", "metric_dead_ends", "pruned", "peak_open", "valid",
)
TIMINGS_HEADER = ("instance", "config", "wall_time")


def records_csv(records: Iterable[RunRecord]) -> str:
    """Deterministic CSV: wall times live in :func:`timings_csv`."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        s = r.stats
        w.writerow((
            r.instance, r.domain, r.config, r.outcome,
            "" if r.makespan is None else format_time(r.makespan),
            s.expanded, s.generated, s.qualitative_dead_ends, s.metric_dead_ends, s.pruned, s.peak_open,
            "" if r.valid is None else int(r.valid),
        ))
    return buf.getvalue()


def timings_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMINGS_HEADER)
    for r in records:
        w.writerow((r.instance, r.config, f"{r.wall_time:.3f}"))
    return buf.getvalue()


def scores_table(scores: IpcScores) -> str:
    lines = [f"{'domain':<12} {'config':<18} {'time':>7} {'quality':>8}"]
    for domain, row in sorted(scores.by_domain().items()):
        for config, (t, q) in row.items():
            lines.append(f"{domain:<12} {config:<18} {t:7.3f} {q:8.3f}")
    for config in scores.time:
        lines.append(f"{'total':<12} {config:<18} {scores.time[config]:7.3f} {scores.quality[config]:8.3f}")
    return "\n".join(lines) + "\n"


def write_plots(scores: IpcScores, directory) -> list[Path]:
    """Per-domain score tables plus a gnuplot script drawing bar charts."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    domains = scores.by_domain()
    configs = list(scores.time)
    data = directory / "scores.dat"
    rows = ["# domain " + " ".join(f"time:{c} quality:{c}" for c in configs)]
    for domain, row in sorted(domains.items()):
        vals = " ".join(f"{row.get(c, (0.0, 0.0))[0]:.4f} {row.get(c, (0.0, 0.0))[1]:.4f}" for c in configs)
        rows.append(f"{domain} {vals}")
    data.write_text("\n".join(rows) + "\n", encoding="utf-8")
    script = directory / "scores.gp"
    plots = []
    for metric, offset in (("time", 2), ("quality", 3)):
        cols = ", ".join(
            f"'scores.dat' using {offset + 2 * i}:xtic(1) title '{c}'" for i, c in enumerate(configs)
        )
        plots.append(
            f"set output '{metric}.png'\nset title 'IPC {metric} score per domain'\nplot {cols}\n"
        )
    script.write_text(
        "set terminal pngcairo size 800,500\nset style data histograms\nset style fill solid 0.8\n"
        "set key outside\nset yrange [0:*]\n" + "".join(plots),
        encoding="utf-8",
    )
    return [data, script]
