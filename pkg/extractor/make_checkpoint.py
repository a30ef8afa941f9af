#!/usr/bin/env python3
"""Create an extractor checkpoint with freshly initialized weights.

    python make_checkpoint.py --out ckpt.pt --variant tiny [--classes 19] [--seed 0]

Real deployments convert trained weights into this container instead; the
random-init path exists for integration tests and plumbing checks.
"""

import argparse
import sys
from pathlib import Path

from oodseg_extractor import make_checkpoint
from oodseg_extractor.model import VARIANTS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    parser.add_argument("--classes", type=int, default=19)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    make_checkpoint(args.out, args.variant, num_classes=args.classes, seed=args.seed)
    print(f"wrote {args.variant} checkpoint ({args.classes} classes) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
