#!/usr/bin/env python3
# Example external limit state: reads one JSON batch per line, replies with
# one JSON array of responses per line.
import json
import sys

for line in sys.stdin:
    pts = json.loads(line)
    out = [3.0 - x1 - 2.0 * (x2 - 1.0) ** 2 for x1, x2 in pts]
    print(json.dumps(out), flush=True)
