#!/usr/bin/env python3
"""Dump stage-3 features and pre-softmax logits for a batch of images.

    python extract.py --checkpoint ckpt.pt --variant B --images 'imgs/*.png' --out dumps/

Use make_checkpoint.py (or oodseg_extractor.make_checkpoint) to produce a
checkpoint when converting freshly initialized or externally trained weights.
"""

import argparse
import glob
import sys
from pathlib import Path

from oodseg_extractor import (
    CheckpointLoadError,
    ExtractorConfig,
    UnreadableImage,
    extract,
    load_model,
)
from oodseg_extractor.model import VARIANTS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--checkpoint", required=True, type=Path)
    parser.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    parser.add_argument("--images", required=True,
                        help="glob pattern for input images")
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    image_paths = sorted(glob.glob(args.images))
    if not image_paths:
        print(f"error: no images match {args.images!r}", file=sys.stderr)
        return 1
    config = ExtractorConfig(
        checkpoint=args.checkpoint,
        variant=args.variant,
        images=image_paths,
        out_dir=args.out,
        device=args.device,
    )
    try:
        model = load_model(config.checkpoint, config.variant, config.device)
    except CheckpointLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for image_path in image_paths:
        try:
            meta = extract(image_path, config, model)
        except UnreadableImage as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"{image_path}: features {meta['feature_shape']} "
              f"logits {meta['logits_shape']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
