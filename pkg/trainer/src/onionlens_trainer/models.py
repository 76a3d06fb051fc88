"""Model builders: the scratch CNN and the frozen-backbone transfer model.

Parameter counts follow the interchange-file convention: a convolution
always accounts for a bias vector (the exporter writes zeros when the
layer has none) and batch normalization counts all four tensors, running
statistics included. Counted this way, the file a model exports to has
exactly `total_params` stored floats.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
from torch import nn

log = logging.getLogger(__name__)

NUM_CLASSES = 5
# widely quoted figure for the original scratch design; the stack below
# is a documented approximation and equality is not asserted
CUSTOM_REFERENCE_PARAMS = 26_504_485


@dataclass
class ModelBundle:
    module: nn.Module
    kind: str  # "custom" | "transfer"
    input_size: int
    total_params: int
    trainable_params: int

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.module.logits(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.module(x)


def interchange_param_count(module: nn.Module) -> int:
    total = 0
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            total += m.weight.numel() + m.out_channels
        elif isinstance(m, nn.BatchNorm2d):
            total += 4 * m.num_features
        elif isinstance(m, nn.Linear):
            total += m.weight.numel()
            if m.bias is not None:
                total += m.bias.numel()
    return total


def _trainable_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


class CustomCnn(nn.Module):
    """Conv/pool stack with a dense head for 224x224x3 -> 5 classes."""

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 32, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(32, 64, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(64, 128, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(128, 128, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(128 * 14 * 14, 1024), nn.ReLU(),
            nn.Linear(1024, 512), nn.ReLU(),
            nn.Linear(512, NUM_CLASSES),
        )
        self.softmax = nn.Softmax(dim=1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.softmax(self.logits(x))


class TransferModel(nn.Module):
    """Frozen ResNet50 trunk, trainable 2048->1024->512->256->5 head."""

    def __init__(self, backbone: nn.Module):
        super().__init__()
        self.backbone = backbone
        self.head = nn.Sequential(
            nn.Linear(2048, 1024), nn.ReLU(),
            nn.Linear(1024, 512), nn.ReLU(),
            nn.Linear(512, 256), nn.ReLU(),
            nn.Linear(256, NUM_CLASSES),
        )
        self.softmax = nn.Softmax(dim=1)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        b = self.backbone
        x = b.maxpool(b.relu(b.bn1(b.conv1(x))))
        x = b.layer4(b.layer3(b.layer2(b.layer1(x))))
        return torch.flatten(b.avgpool(x), 1)

    def logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.softmax(self.logits(x))

    def train(self, mode: bool = True):
        # the trunk stays in eval mode so frozen running stats never move
        super().train(mode)
        self.backbone.eval()
        return self


def build_custom_cnn(seed: int = 0, input_size: int = 224) -> ModelBundle:
    torch.manual_seed(seed)
    module = CustomCnn()
    total = interchange_param_count(module)
    log.info("custom CNN parameters: %s (reference figure: %s)",
             f"{total:,}", f"{CUSTOM_REFERENCE_PARAMS:,}")
    return ModelBundle(module=module, kind="custom", input_size=input_size,
                       total_params=total,
                       trainable_params=_trainable_count(module))


def build_transfer_model(pretrained: bool = False, seed: int = 0,
                         input_size: int = 64) -> ModelBundle:
    """ResNet50 trunk (classification top removed) with every trunk weight
    frozen. With pretrained=False the trunk keeps its seeded random
    initialization; features are then fixed random projections, which is
    the documented desk-scale substitute when weights cannot be fetched.
    """
    from torchvision import models
    from .errors import BackboneUnavailable

    torch.manual_seed(seed)
    if pretrained:
        try:
            backbone = models.resnet50(weights=models.ResNet50_Weights.IMAGENET1K_V2)
        except Exception as exc:
            raise BackboneUnavailable(f"could not obtain trunk weights: {exc}") from exc
    else:
        backbone = models.resnet50(weights=None)
    backbone.fc = nn.Identity()
    for p in backbone.parameters():
        p.requires_grad_(False)
    backbone.eval()

    module = TransferModel(backbone)
    return ModelBundle(module=module, kind="transfer", input_size=input_size,
                       total_params=interchange_param_count(module),
                       trainable_params=_trainable_count(module))
