#!/usr/bin/env python3
"""Projection adapter backed by umap-learn.

Reads the external-projector protocol on stdin (one {"config": {...}} line,
then one {"id", "vector"} line per document) and writes {"id", "x", "y"}
lines on stdout. Use with

    semsteer steer ... --backend external_adapter --external-command "python3 tools/umap_adapter.py"
"""
import json
import sys


def main() -> int:
    try:
        import numpy as np
        import umap
    except ImportError as e:
        print(f"umap_adapter: {e}; install umap-learn", file=sys.stderr)
        return 2

    lines = [l for l in sys.stdin.read().splitlines() if l.strip()]
    if not lines:
        print("umap_adapter: empty input", file=sys.stderr)
        return 2
    config = json.loads(lines[0])["config"]
    records = [json.loads(l) for l in lines[1:]]
    data = np.asarray([r["vector"] for r in records], dtype=np.float64)
    reducer = umap.UMAP(
        n_neighbors=min(int(config.get("n_neighbors", 15)), len(records) - 1),
        min_dist=float(config.get("min_dist", 0.1)),
        metric=config.get("metric", "cosine"),
        random_state=int(config.get("seed", 0)),
    )
    xy = reducer.fit_transform(data)
    for r, (x, y) in zip(records, xy):
        print(json.dumps({"id": r["id"], "x": float(x), "y": float(y)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
