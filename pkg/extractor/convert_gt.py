#!/usr/bin/env python3
"""Convert dataset label images to the {0, 1, 255} PGM ground-truth masks.

    python convert_gt.py --in 'labels/*.png' --out gt/ --ood-labels 2,3

Every pixel whose source label is listed in --ood-labels becomes 1, every
pixel listed in --ignore-labels becomes 255, everything else becomes 0.
Output files are named `<stem>.gt.pgm`.
"""

import argparse
import glob
import sys
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


def convert(label_image: np.ndarray, ood_labels, ignore_labels) -> np.ndarray:
    mask = np.zeros(label_image.shape, dtype=np.uint8)
    mask[np.isin(label_image, list(ood_labels))] = 1
    mask[np.isin(label_image, list(ignore_labels))] = 255
    return mask


def write_pgm(mask: np.ndarray, path) -> None:
    height, width = mask.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(mask.tobytes("C"))


def _parse_labels(text: str):
    return [int(part) for part in text.split(",") if part.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="inputs", required=True,
                        help="glob pattern for label images")
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--ood-labels", required=True,
                        help="comma-separated source labels meaning OoD")
    parser.add_argument("--ignore-labels", default="255",
                        help="comma-separated source labels to ignore (default 255)")
    args = parser.parse_args(argv)

    paths = sorted(glob.glob(args.inputs))
    if not paths:
        print(f"error: no label images match {args.inputs!r}", file=sys.stderr)
        return 1
    ood = _parse_labels(args.ood_labels)
    ignore = _parse_labels(args.ignore_labels)
    args.out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        try:
            with Image.open(path) as img:
                labels = np.asarray(img.convert("L"))
        except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return 1
        mask = convert(labels, ood, ignore)
        out_path = args.out / f"{Path(path).stem}.gt.pgm"
        write_pgm(mask, out_path)
        print(f"{path} -> {out_path} ({int((mask == 1).sum())} OoD px)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
