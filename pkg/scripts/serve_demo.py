#!/usr/bin/env python3
"""Boot the diagnosis service with a ready-made demo deployment.

Writes a deployment directory containing a service config, a case store, and
two backends: "default" (deterministic synthetic detector, works on any
upload) and "golden" (replays stored detections for the bundled sample
image). Then starts serving.

Usage:
  python3 scripts/serve_demo.py --dir demo_service --listen 127.0.0.1:8713

Try it:
  curl -s -X POST --data-binary @demo_service/sample.png \
       http://127.0.0.1:8713/v1/diagnose | python3 -m json.tool
  curl -s -X POST 'http://127.0.0.1:8713/v1/diagnose?backend=default' \
       --data-binary @some_photo.jpg
"""

from __future__ import annotations

import argparse
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from pod_sentry.cli import main as cli_main  # noqa: E402
from pod_sentry.docio import CONFIG_SCHEMA, dump_document  # noqa: E402

GOLDEN = REPO / "tests" / "fixtures" / "golden"


def prepare(deploy: Path, listen: str, seed: int) -> Path:
    deploy.mkdir(parents=True, exist_ok=True)
    shutil.copy(GOLDEN / "image.png", deploy / "sample.png")
    shutil.copy(GOLDEN / "detections.json", deploy / "golden_detections.json")
    config_path = deploy / "service.json"
    dump_document(
        config_path,
        {
            "schema": CONFIG_SCHEMA,
            "store": "store",
            "listen": listen,
            "backends": {
                "default": {"kind": "mock", "parameters": {"seed": str(seed)}},
                "golden": {"kind": "file", "parameters": {"path": "golden_detections.json"}},
            },
            "default_backend": "default",
            "diagnosis": {"nms_iou_threshold": 0.5, "score_floor": 0.0},
            "target_size": 640,
        },
    )
    return config_path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dir", type=Path, default=Path("demo_service"))
    parser.add_argument("--listen", default="127.0.0.1:8713")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--no-serve", action="store_true",
                        help="only write the deployment directory")
    args = parser.parse_args()

    config_path = prepare(args.dir, args.listen, args.seed)
    print(f"deployment ready at {args.dir}/ (config {config_path})")
    print(f"sample upload: curl -s -X POST --data-binary @{args.dir}/sample.png "
          f"'http://{args.listen}/v1/diagnose?backend=golden'")
    if args.no_serve:
        return 0
    return cli_main(["serve", "--config", str(config_path)])


if __name__ == "__main__":
    raise SystemExit(main())
