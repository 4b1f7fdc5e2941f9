#!/usr/bin/env python3
# Projection adapter for tests: x, y = first two vector components.
# Exits 3 when the config line asks for seed 13 to exercise failure handling.
import json
import sys

lines = sys.stdin.read().splitlines()
config = json.loads(lines[0])["config"]
if config.get("seed") == 13:
    sys.exit(3)
for line in lines[1:]:
    if not line.strip():
        continue
    rec = json.loads(line)
    v = rec["vector"]
    print(json.dumps({"id": rec["id"], "x": v[0], "y": v[1]}))
