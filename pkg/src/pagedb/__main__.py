"""``python -m pagedb server|client|bench ...``"""

import argparse
import sys

from . import bench, client, server


def main(argv=None):
    p = argparse.ArgumentParser(prog="pagedb")
    sub = p.add_subparsers(dest="command", required=True)
    server.add_server_args(sub.add_parser("server", help="run the database server"))
    client.add_client_args(sub.add_parser("client", help="interactive or batch client"))
    bench.add_bench_args(sub.add_parser("bench", help="benchmark join implementations"))
    args = p.parse_args(argv)
    if args.command == "server":
        return server.serve(args)
    if args.command == "client":
        return client.run(args)
    return bench.main_with_args(args)


if __name__ == "__main__":
    sys.exit(main())
