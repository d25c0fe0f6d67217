"""Run the sharing hub as a standalone HTTP service."""

import argparse

import uvicorn

from .server import create_app
from .storage import FileStore, MemoryStore

DEFAULT_UNIVERSE = "role:doctor,role:nurse,dept:cardiology,dept:dermatology"


def main(argv=None):
    ap = argparse.ArgumentParser(prog="poc-hub", description=__doc__)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    ap.add_argument("--universe", default=DEFAULT_UNIVERSE,
                    help="comma-separated attribute universe")
    ap.add_argument("--storage-dir", default=None,
                    help="persist documents under this directory (default: in-memory)")
    args = ap.parse_args(argv)
    store = FileStore(args.storage_dir) if args.storage_dir else MemoryStore()
    app = create_app([a.strip() for a in args.universe.split(",") if a.strip()], store=store)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
