"""Join benchmark: times a workload against a server and compares join variants.

A run produces a fragment (timing samples plus a result checksum). Given a
nested-loop baseline and a candidate fragment for the same workload,
``report`` emits one feedback sentence and a key=value file.
"""

import argparse
import hashlib
import random
import statistics
import string
import sys
import tempfile
import time
from dataclasses import dataclass, field

from .client import Connection
from .config import DEFAULT_HOST, DEFAULT_PORT, Config
from .errors import UsageError

BASELINE = "nested"

# name -> (rows in bench_a, rows in bench_b)
PRESETS = {
    "join_tiny": (20, 20),
    "join_small": (100, 100),
    "join_300": (300, 300),
    "join_1k": (1000, 1000),
}

JOIN_QUERY = (
    "SELECT bench_a.id, bench_a.tag, bench_b.note FROM bench_a, bench_b "
    "WHERE bench_a.id = bench_b.ref"
)


@dataclass
class Workload:
    name: str
    seed: int
    setup: list
    timed: list
    repetitions: int = 5
    tables: tuple = ("bench_a", "bench_b")


@dataclass
class Fragment:
    workload: str
    variant: str
    samples_ms: list = field(default_factory=list)
    rows: int = 0
    checksum: str = ""
    status: str = "OK"  # OK | FAILED | INVALID
    message: str = ""

    @property
    def median_ms(self):
        return statistics.median(self.samples_ms) if self.samples_ms else float("nan")

    @property
    def mean_ms(self):
        return statistics.fmean(self.samples_ms) if self.samples_ms else float("nan")

    def to_lines(self):
        return [
            f"workload={self.workload}",
            f"variant={self.variant}",
            f"status={self.status}",
            f"median_ms={self.median_ms:.3f}",
            f"mean_ms={self.mean_ms:.3f}",
            f"samples_ms={','.join(f'{s:.3f}' for s in self.samples_ms)}",
            f"rows={self.rows}",
            f"checksum={self.checksum}",
            f"message={self.message}",
        ]

    @classmethod
    def from_lines(cls, lines):
        kv = dict(line.split("=", 1) for line in lines if "=" in line)
        samples = [float(s) for s in kv.get("samples_ms", "").split(",") if s]
        return cls(kv["workload"], kv["variant"], samples, int(kv.get("rows", 0)),
                   kv.get("checksum", ""), kv.get("status", "OK"), kv.get("message", ""))


def _word(rng, n=8):
    return "".join(rng.choice(string.ascii_lowercase) for _ in range(n))


def generate_workload(name="join_small", seed=42, sizes=None, match_rate=1.0, repetitions=5):
    """Deterministic two-table equi-join workload.

    ``bench_a.id`` holds the unique keys 0..n_a-1. Each ``bench_b.ref`` is,
    with probability ``match_rate``, the next key of a shuffled copy of those
    keys (cycling once exhausted), otherwise a negative key that matches
    nothing.
    """
    if sizes is None:
        sizes = PRESETS[name]
    n_a, n_b = sizes
    if n_a < 0 or n_b < 0:
        raise ValueError("table sizes must be non-negative")
    rng = random.Random(seed)
    keys = list(range(n_a))
    rng.shuffle(keys)
    setup = [
        "CREATE TABLE bench_a (id INT, tag VARCHAR)",
        "CREATE TABLE bench_b (ref INT, note VARCHAR)",
    ]
    setup.extend(f'INSERT INTO bench_a VALUES ({k}, "{_word(rng)}")' for k in keys)
    perm = keys[:]
    rng.shuffle(perm)
    for i in range(n_b):
        if perm and rng.random() < match_rate:
            ref = perm[i % n_a]
        else:
            ref = -(i + 1)
        setup.append(f'INSERT INTO bench_b VALUES ({ref}, "{_word(rng)}")')
    return Workload(name, seed, setup, [JOIN_QUERY], repetitions)


def checksum(rows):
    """Order-independent digest of a result: row count plus sorted rendered rows."""
    h = hashlib.sha256()
    rendered = sorted("\t".join(map(str, r)) for r in rows)
    h.update(str(len(rendered)).encode())
    for line in rendered:
        h.update(b"\n" + line.encode())
    return h.hexdigest()[:16]


def run(workload, server_address, variant):
    """Set up ``workload`` on a server and time its statements.

    The server must already be running with the join implementation named
    by ``variant``; the label is recorded, not enforced.
    """
    frag = Fragment(workload.name, variant)
    with Connection(server_address) as conn:
        for table in workload.tables:
            conn.query(f"DROP TABLE {table}")  # best effort, ERR if absent
        for stmt in workload.setup:
            resp = conn.query(stmt)
            if not resp.ok:
                frag.status, frag.message = "FAILED", f"setup: {resp.error}"
                return frag
        sums = set()
        for _ in range(workload.repetitions):
            start = time.perf_counter()
            results = []
            for stmt in workload.timed:
                resp = conn.query(stmt)
                if not resp.ok:
                    frag.status, frag.message = "FAILED", resp.error
                    return frag
                results.append(resp)
            frag.samples_ms.append((time.perf_counter() - start) * 1000)
            rows = [tuple(r) for resp in results for r in (resp.rows or [])]
            frag.rows = len(rows)
            sums.add(checksum(rows))
        if len(sums) > 1:
            frag.status, frag.message = "INVALID", "results differ between repetitions"
        frag.checksum = sums.pop() if sums else checksum([])
    return frag


def percent_delta(baseline_ms, candidate_ms):
    return (baseline_ms - candidate_ms) / baseline_ms * 100


def format_percent(delta):
    value = round(abs(delta), 1)
    return f"{value:g}"


def feedback_line(name, delta):
    direction = "slower" if delta < 0 and format_percent(delta) != "0" else "faster"
    return (f"In the test {name}, the submission is {format_percent(delta)} percent "
            f"{direction} than nested loop join.")


def report(fragments):
    """Returns (human text, key=value text) for baseline/candidate fragments."""
    by_workload = {}
    for frag in fragments:
        by_workload.setdefault(frag.workload, []).append(frag)
    text, blocks = [], []
    for name, frags in by_workload.items():
        base = [f for f in frags if f.variant == BASELINE]
        if not base:
            raise UsageError(f"no {BASELINE} baseline for workload {name}")
        base = base[0]
        blocks.append("\n".join(base.to_lines()))
        for cand in (f for f in frags if f is not base):
            extra = []
            if "FAILED" in (base.status, cand.status):
                bad = base if base.status == "FAILED" else cand
                text.append(f"In the test {name}, the {bad.variant} run FAILED: {bad.message}")
                extra.append("verdict=FAILED")
            elif "INVALID" in (base.status, cand.status) or base.checksum != cand.checksum:
                text.append(f"In the test {name}, the submission is INVALID: "
                            f"results differ from nested loop join.")
                extra.append("verdict=INVALID")
            else:
                delta = percent_delta(base.median_ms, cand.median_ms)
                text.append(feedback_line(name, delta))
                extra.extend([f"delta_percent={delta:.3f}", "verdict=OK"])
            blocks.append("\n".join(cand.to_lines() + extra))
    return "\n".join(text) + "\n", "\n\n".join(blocks) + "\n"


def read_fragment(path):
    with open(path, encoding="utf-8") as f:
        block = f.read().split("\n\n")[0]
    return Fragment.from_lines(block.splitlines())


def compare_local(workload, data_root=None, **engine_overrides):
    """Run ``workload`` against fresh in-process servers, one per join variant."""
    from .engine import Engine
    from .server import start_server

    frags = []
    with tempfile.TemporaryDirectory(dir=data_root) as root:
        for variant in ("nested", "hash"):
            config = Config(data_dir=f"{root}/{variant}", join_impl=variant, **engine_overrides)
            server = start_server(Engine(config))
            try:
                frags.append(run(workload, server.address, variant))
            finally:
                server.stop()
    return frags


def build_arg_parser(prog="pagedb-bench"):
    p = argparse.ArgumentParser(prog=prog, description="Benchmark join implementations.")
    add_bench_args(p)
    return p


def add_bench_args(p):
    p.add_argument("--server", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}", help="host:port")
    p.add_argument("--workload", default="join_small", help=f"one of {sorted(PRESETS)}")
    p.add_argument("--variant", choices=("nested", "hash"), default="nested",
                   help="join implementation the server was started with")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs=2, metavar=("ROWS_A", "ROWS_B"))
    p.add_argument("--match-rate", type=float, default=1.0)
    p.add_argument("--out", help="write the key=value report here")
    p.add_argument("--baseline", help="nested-loop fragment file to compare against")
    p.add_argument("--local", action="store_true",
                   help="start in-process servers for both variants and compare")


def main_with_args(args):
    if args.reps < 1:
        print("error: --reps must be positive", file=sys.stderr)
        return 2
    if args.sizes is None and args.workload not in PRESETS:
        print(f"error: unknown workload {args.workload!r}; pass --sizes", file=sys.stderr)
        return 2
    workload = generate_workload(args.workload, args.seed, args.sizes,
                                 args.match_rate, args.reps)
    if args.local:
        frags = compare_local(workload)
    else:
        try:
            frags = [run(workload, args.server, args.variant)]
        except OSError as e:
            print(f"error: cannot connect: {e}", file=sys.stderr)
            return 1
        if args.baseline:
            frags.insert(0, read_fragment(args.baseline))
    if len(frags) > 1:
        try:
            text, structured = report(frags)
        except UsageError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        sys.stdout.write(text)
    else:
        structured = "\n".join(frags[0].to_lines()) + "\n"
        sys.stdout.write(structured)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(structured)
    return 0 if all(f.status == "OK" for f in frags) else 1


def main(argv=None):
    return main_with_args(build_arg_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
