#!/usr/bin/env python3
"""Start the gateway service (evaluation + management listeners).

Equivalent to `roe-gate serve`; reads a JSON config file given as the first
argument, with ROE_GATE_* environment variables overriding it.
"""

import sys

from roe_gate.config import load_config
from roe_gate.http_api import serve


def main() -> None:
    path = sys.argv[1] if len(sys.argv) > 1 else None
    serve(load_config(path))


if __name__ == "__main__":
    main()
