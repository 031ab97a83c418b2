"""Line-based TCP server: one session per connection, auto-commit per line.

Wire format (UTF-8, ``\\n`` line endings). A request is one statement per
line; a trailing ``;`` is ignored. Responses::

    OK <n>              n = rows returned, rows affected, or 0 for DDL
    <col>\\t<col>...     only for result sets
    <v>\\t<v>...         n row lines, only for result sets
    .                   terminator after every OK response

    ERR <message>       single line, no terminator
"""

import argparse
import logging
import signal
import socketserver
import sys
import threading
from dataclasses import dataclass

from .config import DEFAULT_HOST, DEFAULT_PORT, JOIN_IMPLS, LOCK_MODES, Config, parse_address
from .engine import Engine, ResultSet
from .errors import DBError
from .parser import parse

log = logging.getLogger(__name__)

MAX_LINE = 64 * 1024
TERMINATOR = "."


@dataclass
class Session:
    peer: object
    txn_id: int = None
    requests: int = 0


def format_outcome(outcome):
    if isinstance(outcome, ResultSet):
        lines = [f"OK {len(outcome.rows)}", "\t".join(outcome.columns)]
        lines.extend("\t".join(map(str, row)) for row in outcome.rows)
    else:
        lines = [f"OK {outcome.count}"]
    lines.append(TERMINATOR)
    return ("\n".join(lines) + "\n").encode("utf-8")


def format_error(message):
    message = " ".join(str(message).splitlines())
    return f"ERR {message}\n".encode("utf-8")


def handle_request(engine, session, request):
    """Run one request line (str or bytes) and return the response bytes."""
    if isinstance(request, bytes):
        try:
            request = request.decode("utf-8")
        except UnicodeDecodeError:
            return format_error("invalid query: request is not valid UTF-8")
    text = request.strip()
    if text.endswith(";"):
        text = text[:-1].rstrip()
    if not text:
        return format_error("invalid query: empty statement")
    session.requests += 1
    try:
        stmt = parse(text)
    except DBError as e:
        return format_error(e)
    txn = engine.txns.begin(label=text)
    session.txn_id = txn.id
    try:
        outcome = engine.execute(stmt, txn)
        engine.txns.commit(txn)
    except DBError as e:
        engine.txns.abort(txn, str(e))
        return format_error(e)
    except Exception as e:  # never let a bug kill the session
        log.exception("internal error on %r", text)
        engine.txns.abort(txn, repr(e))
        return format_error(f"internal error: {e!r}")
    finally:
        session.txn_id = None
    return format_outcome(outcome)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server = self.server
        session = Session(self.client_address)
        while True:
            try:
                line = self.rfile.readline(MAX_LINE + 1)
            except OSError:
                return
            if not line:
                return
            if len(line) > MAX_LINE and not line.endswith(b"\n"):
                self._send(format_error("invalid query: request too long"))
                return
            if not server.begin_request():
                self._send(format_error("server shutting down"))
                return
            try:
                response = handle_request(server.engine, session, line)
            finally:
                server.end_request()
            if not self._send(response):
                return

    def _send(self, data):
        try:
            self.wfile.write(data)
            self.wfile.flush()
            return True
        except OSError:
            return False


class DBServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, engine):
        super().__init__(address, _Handler)
        self.engine = engine
        self._inflight = 0
        self._closing = False
        self._cv = threading.Condition()

    @property
    def address(self):
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def begin_request(self):
        with self._cv:
            if self._closing:
                return False
            self._inflight += 1
            return True

    def end_request(self):
        with self._cv:
            self._inflight -= 1
            self._cv.notify_all()

    def drain(self):
        """Refuse new requests and wait for in-flight statements to finish."""
        with self._cv:
            self._closing = True
            while self._inflight:
                self._cv.wait()

    def stop(self):
        """Stop serving, drain, flush the pool and close the socket."""
        self.shutdown()
        self.drain()
        self.engine.close()
        self.server_close()


def start_server(engine, host=DEFAULT_HOST, port=0):
    """Serve ``engine`` on a background thread; returns the server."""
    server = DBServer((host, port), engine)
    thread = threading.Thread(target=server.serve_forever, name="pagedb-server", daemon=True)
    thread.start()
    server.thread = thread
    return server


def build_arg_parser(prog="pagedb-server"):
    p = argparse.ArgumentParser(prog=prog, description="Run the database server.")
    add_server_args(p)
    return p


def add_server_args(p):
    p.add_argument("--listen", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}", help="host:port")
    p.add_argument("--data-dir", default="data")
    p.add_argument("--pool-size", type=int, default=Config.pool_size)
    p.add_argument("--lock-mode", choices=LOCK_MODES, default="global")
    p.add_argument("--join-impl", choices=JOIN_IMPLS, default="nested")
    p.add_argument("--poll-ms", type=float, default=Config.poll_interval * 1000)
    p.add_argument("--timeout-ms", type=float, default=Config.wait_timeout * 1000)
    p.add_argument("-v", "--verbose", action="store_true")


def serve(args):
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    config = Config(
        data_dir=args.data_dir,
        pool_size=args.pool_size,
        lock_mode=args.lock_mode,
        join_impl=args.join_impl,
        poll_interval=args.poll_ms / 1000,
        wait_timeout=args.timeout_ms / 1000,
    )
    try:
        engine = Engine(config)
        server = DBServer(parse_address(args.listen), engine)
    except (DBError, OSError, ValueError) as e:
        print(f"startup error: {e}", file=sys.stderr)
        return 2

    def on_signal(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    print(f"listening on {server.address}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    finally:
        server.drain()
        engine.close()
        server.server_close()
    log.info("shut down cleanly")
    return 0


def main(argv=None):
    return serve(build_arg_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
