"""Reference segmentation network with the shape contract the engine expects.

Four hierarchical downsampling stages (output strides 4, 8, 16, 32) feed a
UPerNet-style decoder (pyramid pooling on the deepest stage, FPN top-down
fusion, 1x1 classifier). The third stage carries the features handed to the
clustering engine; the classifier output is taken before any softmax.

Variants B and L use the stage widths of the production backbones they
stand in for; `tiny` exists for fast tests and smoke runs. Plain strided
convolutions replace the deformable sampling of the original backbones, so
checkpoints are not interchangeable with them.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

# variant -> (stage channels, blocks per stage, decoder width)
VARIANTS = {
    "B": ((112, 224, 448, 896), (2, 2, 4, 2), 512),
    "L": ((160, 320, 640, 1280), (2, 2, 4, 2), 512),
    "tiny": ((8, 16, 32, 64), (1, 1, 1, 1), 16),
}

STAGE_STRIDES = (4, 8, 16, 32)
FEATURE_STAGE = 2  # third stage, zero-based
PAD_MULTIPLE = STAGE_STRIDES[-1]


class ConvBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.norm = nn.BatchNorm2d(channels)

    def forward(self, x):
        return F.relu(self.norm(self.conv(x)) + x)


class Stage(nn.Module):
    """Optional stride-2 downsample followed by residual conv blocks."""

    def __init__(self, in_ch, out_ch, depth, downsample):
        super().__init__()
        if downsample:
            self.down = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.down = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        self.blocks = nn.Sequential(*[ConvBlock(out_ch) for _ in range(depth)])
        self.norm = nn.BatchNorm2d(out_ch)

    def forward(self, x):
        return self.norm(self.blocks(F.relu(self.down(x))))


class HierarchicalBackbone(nn.Module):
    def __init__(self, channels, depths):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(3, channels[0], 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(channels[0]),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels[0], channels[0], 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(channels[0]),
            nn.ReLU(inplace=True),
        )
        stages = []
        for i, (ch, depth) in enumerate(zip(channels, depths)):
            in_ch = channels[max(i - 1, 0)] if i else channels[0]
            stages.append(Stage(in_ch, ch, depth, downsample=i > 0))
        self.stages = nn.ModuleList(stages)
        self.stage_strides = STAGE_STRIDES

    def forward(self, x):
        x = self.stem(x)
        outputs = []
        for stage in self.stages:
            x = stage(x)
            outputs.append(x)
        return outputs


class PyramidPooling(nn.Module):
    def __init__(self, in_ch, out_ch, bins=(1, 2, 3, 6)):
        super().__init__()
        self.paths = nn.ModuleList(
            nn.Sequential(
                nn.AdaptiveAvgPool2d(bin_size),
                nn.Conv2d(in_ch, out_ch, 1, bias=False),
                nn.BatchNorm2d(out_ch),
                nn.ReLU(inplace=True),
            )
            for bin_size in bins
        )
        self.fuse = nn.Sequential(
            nn.Conv2d(in_ch + len(bins) * out_ch, out_ch, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        size = x.shape[-2:]
        pooled = [
            F.interpolate(path(x), size=size, mode="bilinear", align_corners=False)
            for path in self.paths
        ]
        return self.fuse(torch.cat([x] + pooled, dim=1))


class UperNetStyleDecoder(nn.Module):
    """Pyramid pooling + FPN fusion; emits raw class logits at 1/4 scale."""

    def __init__(self, channels, width, num_classes):
        super().__init__()
        self.ppm = PyramidPooling(channels[-1], width)
        self.laterals = nn.ModuleList(
            nn.Conv2d(ch, width, 1, bias=False) for ch in channels[:-1]
        )
        self.smooth = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(width, width, 3, padding=1, bias=False),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            )
            for _ in channels[:-1]
        )
        self.fuse = nn.Sequential(
            nn.Conv2d(width * len(channels), width, 3, padding=1, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
        )
        self.classifier = nn.Conv2d(width, num_classes, 1)

    def forward(self, features):
        pyramid = [self.ppm(features[-1])]
        for lateral, smooth, feat in zip(
            reversed(self.laterals), reversed(self.smooth), reversed(features[:-1])
        ):
            upper = F.interpolate(
                pyramid[0], size=feat.shape[-2:], mode="bilinear", align_corners=False
            )
            pyramid.insert(0, smooth(lateral(feat) + upper))
        size = pyramid[0].shape[-2:]
        aligned = [
            F.interpolate(level, size=size, mode="bilinear", align_corners=False)
            for level in pyramid
        ]
        return self.classifier(self.fuse(torch.cat(aligned, dim=1)))


class SegModel(nn.Module):
    def __init__(self, variant: str, num_classes: int = 19):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
        channels, depths, width = VARIANTS[variant]
        self.variant = variant
        self.num_classes = num_classes
        self.backbone = HierarchicalBackbone(channels, depths)
        self.decoder = UperNetStyleDecoder(channels, width, num_classes)

    @property
    def feature_stage_module(self) -> nn.Module:
        """The module whose output is the exported feature map (post-norm)."""
        return self.backbone.stages[FEATURE_STAGE]

    @property
    def feature_stride(self) -> int:
        return self.backbone.stage_strides[FEATURE_STAGE]

    def forward(self, x):
        features = self.backbone(x)
        logits_small = self.decoder(features)
        return F.interpolate(
            logits_small, size=x.shape[-2:], mode="bilinear", align_corners=False
        )


def build_model(variant: str, num_classes: int = 19) -> SegModel:
    model = SegModel(variant, num_classes)
    model.eval()
    return model
