"""Terminal client: interactive REPL and batch script runner."""

import argparse
import socket
import sys
from dataclasses import dataclass, field

from .config import DEFAULT_HOST, DEFAULT_PORT, parse_address


class ConnectionLost(Exception):
    pass


@dataclass
class Response:
    raw: str
    ok: bool
    count: int = 0
    columns: list = None  # None unless the response carries a result set
    rows: list = field(default_factory=list)
    error: str = None


class Connection:
    def __init__(self, address, timeout=None):
        host, port = parse_address(address) if isinstance(address, str) else address
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def close(self):
        try:
            self.rfile.close()
        finally:
            self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _line(self):
        line = self.rfile.readline()
        if not line.endswith(b"\n"):
            raise ConnectionLost("connection lost")
        return line.decode("utf-8")

    def send_raw(self, data):
        self.sock.sendall(data)

    def read_response(self):
        first = self._line()
        raw = [first]
        head = first.rstrip("\n")
        if head.startswith("ERR "):
            return Response("".join(raw), False, error=head[4:])
        if not head.startswith("OK "):
            raise ConnectionLost(f"protocol error: {head!r}")
        count = int(head[3:])
        nxt = self._line()
        raw.append(nxt)
        if nxt == ".\n":
            return Response("".join(raw), True, count)
        columns = nxt.rstrip("\n").split("\t")
        rows = []
        for _ in range(count):
            line = self._line()
            raw.append(line)
            rows.append(line.rstrip("\n").split("\t"))
        end = self._line()
        raw.append(end)
        if end != ".\n":
            raise ConnectionLost(f"protocol error: expected terminator, got {end!r}")
        return Response("".join(raw), True, count, columns, rows)

    def query(self, statement):
        self.sock.sendall(statement.replace("\n", " ").encode("utf-8") + b"\n")
        return self.read_response()


def render_table(columns, rows):
    widths = [len(c) for c in columns]
    for row in rows:
        widths = [max(w, len(v)) for w, v in zip(widths, row)]

    def fmt(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [fmt(columns), "-+-".join("-" * w for w in widths)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines)


def render_response(resp):
    if not resp.ok:
        return f"error: {resp.error}"
    plural = "row" if resp.count == 1 else "rows"
    if resp.columns is None:
        return f"{resp.count} {plural}"
    return f"{render_table(resp.columns, resp.rows)}\n({resp.count} {plural})"


def _connect(address, err):
    try:
        return Connection(address)
    except (OSError, ValueError):
        print("error: cannot connect", file=err)
        return None


def repl(address, raw=False, stdin=None, out=None, err=None):
    stdin = stdin or sys.stdin
    out = out or sys.stdout
    err = err or sys.stderr
    conn = _connect(address, err)
    if conn is None:
        return 1
    interactive = stdin.isatty()
    with conn:
        while True:
            if interactive:
                out.write("db> ")
                out.flush()
            line = stdin.readline()
            if not line:
                return 0
            line = line.strip()
            if not line:
                continue
            if line == "\\q":
                return 0
            try:
                resp = conn.query(line)
            except (OSError, ConnectionLost):
                print("error: connection lost", file=err)
                return 1
            out.write(resp.raw if raw else render_response(resp) + "\n")
            out.flush()


def batch(address, script, keep_going=False, raw=True, out=None, err=None):
    """Run a script file (or iterable of lines); prints wire responses."""
    out = out or sys.stdout
    err = err or sys.stderr
    if isinstance(script, str):
        try:
            with open(script, encoding="utf-8") as f:
                lines = f.read().splitlines()
        except OSError as e:
            print(f"error: cannot read script: {e}", file=err)
            return 1
    else:
        lines = list(script)
    conn = _connect(address, err)
    if conn is None:
        return 1
    status = 0
    with conn:
        for line in lines:
            line = line.strip()
            if not line or line.startswith("--"):
                continue
            try:
                resp = conn.query(line)
            except (OSError, ConnectionLost):
                print("error: connection lost", file=err)
                return 1
            out.write(resp.raw if raw else render_response(resp) + "\n")
            if not resp.ok:
                status = 1
                if not keep_going:
                    break
    out.flush()
    return status


def build_arg_parser(prog="pagedb-client"):
    p = argparse.ArgumentParser(prog=prog, description="Talk to a database server.")
    add_client_args(p)
    return p


def add_client_args(p):
    p.add_argument("--server", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}", help="host:port")
    p.add_argument("--raw", action="store_true", help="print wire responses verbatim")
    p.add_argument("--keep-going", action="store_true", help="batch: continue after ERR")
    p.add_argument("--file", help="run statements from a script instead of the REPL")


def run(args):
    if args.file:
        return batch(args.server, args.file, keep_going=args.keep_going)
    return repl(args.server, raw=args.raw)


def main(argv=None):
    return run(build_arg_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
