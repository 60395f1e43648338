#!/usr/bin/env python3
"""Pool-vs-respawn throughput across texture-library sizes.

Shows the scaling behavior behind the benchmark: the respawn strategy pays
the library-regeneration cost on every scene, so its per-scene cost grows
with the library, while the pool strategy's per-scene cost stays flat.
"""

import argparse
import json
from dataclasses import replace

from randr.config import parse_config
from randr.dataset import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", "-c", required=True)
    ap.add_argument("--scenes", type=int, default=60)
    ap.add_argument("--library-sizes", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--out", help="optional JSON results path")
    args = ap.parse_args()

    base = parse_config(args.config)
    results = []
    for size in args.library_sizes:
        cfg = replace(base, textures=replace(base.textures, library_size=size))
        cfg = replace(cfg, sampler=replace(cfg.sampler, texture_count=size))
        report = bench(cfg, num_scenes=args.scenes)
        row = {"library_size": size, **report.to_dict()}
        results.append(row)
        pool = report.strategies["pool"]
        resp = report.strategies["respawn"]
        print(
            f"library={size:5d}  pool {pool.per_scene_seconds * 1e3:7.1f} ms/scene  "
            f"respawn {resp.per_scene_seconds * 1e3:7.1f} ms/scene  "
            f"speedup {report.speedup_pool_over_respawn:.2f}x"
        )
    if args.out:
        with open(args.out, "w") as f:
            json.dump(results, f, indent=2)


if __name__ == "__main__":
    main()
