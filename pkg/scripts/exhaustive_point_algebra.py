"""Check point-algebra consistency against brute force on every small network.

Enumerates every network that puts at most one relation on each unordered
pair of ``n`` variables (7 choices per pair, counting "no constraint") and
compares ``PointNetwork.consistent`` with an oracle that searches all total
preorders of the variables.  With ``n = 5`` this is 7**10 networks and takes
a couple of hours on one core.

    python scripts/exhaustive_point_algebra.py 5
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import sys
import time
from pathlib import Path

from htep.model import TemporalConstraint, TimeVar
import htep.tpn
from htep.tpn import PointNetwork

RELATIONS = ("<", "<=", "=", "!=", ">", ">=")
_HOLDS = {
    "<": lambda x, y: x < y,
    "<=": lambda x, y: x <= y,
    "=": lambda x, y: x == y,
    "!=": lambda x, y: x != y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
}


def total_preorders(n: int) -> list[tuple[int, ...]]:
    """Rank vectors of every weak ordering of ``n`` items (ranks are dense)."""
    out = []
    for ranks in itertools.product(range(n), repeat=n):
        used = set(ranks)
        if used == set(range(len(used))):
            out.append(ranks)
    return out


def run(n: int, progress: int = 0) -> tuple[int, list]:
    variables = [TimeVar(i) for i in range(n)]
    pairs = list(itertools.combinations(range(n), 2))
    preorders = total_preorders(n)
    full = (1 << len(preorders)) - 1
    options = []
    for a, b in pairs:
        row = [((), full)]
        for r in RELATIONS:
            mask = 0
            for k, ranks in enumerate(preorders):
                if _HOLDS[r](ranks[a], ranks[b]):
                    mask |= 1 << k
            row.append(((TemporalConstraint(variables[a], r, variables[b]),), mask))
        options.append(row)
    build = PointNetwork.from_constraints
    checked, mismatches = 0, []
    start = time.perf_counter()
    for combo in itertools.product(*options):
        mask = full
        constraints = []
        for cs, m in combo:
            mask &= m
            constraints.extend(cs)
        expected = mask != 0
        if build(constraints, variables).consistent() != expected:
            mismatches.append(constraints)
        checked += 1
        if progress and checked % progress == 0:
            rate = checked / (time.perf_counter() - start)
            print(f"{checked} checked, {len(mismatches)} mismatches, {rate:.0f}/s", flush=True)
    return checked, mismatches


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("n", type=int, nargs="?", default=4)
    ap.add_argument("--progress", type=int, default=0, help="report every N networks")
    args = ap.parse_args(argv)
    checked, mismatches = run(args.n, args.progress)
    # the hash ties a recorded result to the exact network code that produced it
    digest = hashlib.sha256(Path(htep.tpn.__file__).read_bytes()).hexdigest()[:16]
    print(f"variables={args.n} networks={checked} mismatches={len(mismatches)} tpn_sha256={digest}")
    for cs in mismatches[:10]:
        print("  " + ", ".join(map(str, cs)))
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
