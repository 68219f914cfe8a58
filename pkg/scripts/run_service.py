#!/usr/bin/env python3
"""Run the preview service.

Usage: python scripts/run_service.py [--host 127.0.0.1] [--port 8000]
                                     [--report-dir neurotopo-sessions]

The companion browser UI in frontend/ talks to this server; see its README
for the build step and point it at the same host/port.
"""

import argparse

import uvicorn

from neurotopo.service import create_app


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--report-dir", default="neurotopo-sessions")
    parser.add_argument("--session-timeout", type=float, default=3600.0)
    args = parser.parse_args()
    app = create_app(report_dir=args.report_dir, idle_timeout=args.session_timeout)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
