"""Profile extraction, channel masking, and split accuracy for one model.

describe() reports per-channel L2 magnitudes of each block's fc1 rows and
Taylor importance |sum(grad * weight)| aggregated over the channel's fc1
row, fc1 bias entry, and fc2 column, accumulated over a fixed set of
calibration batches. evaluate() zeroes the dropped channels' fc1 rows/bias
and fc2 columns, measures accuracy on the requested split, then restores
the pristine weights, so repeated evaluations of the same mask are
bit-identical and the model never degrades across calls.
"""
from __future__ import annotations

import torch
from torch import nn

from .config import AdapterConfig
from .data import cifar10_split, synthetic_split
from .model import GEOMETRIES, build_model

_EVAL_CHUNK = 256


class ModelEvaluator:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.device = torch.device(config.device)
        self.model = build_model(config.model, config.seed).to(self.device)

        if config.dataset == "synthetic":
            image = GEOMETRIES[config.model]["image"]
            px, py, hx, hy = synthetic_split(
                config.seed, config.proxy_size, config.heldout_size, image=image
            )
        elif config.dataset == "cifar10":
            px, py, hx, hy = cifar10_split(
                config.data_root, config.seed, config.proxy_size, config.heldout_size
            )
        else:
            raise ValueError(f"unknown dataset {config.dataset!r}")
        self.splits = {
            "proxy": (px.to(self.device), py.to(self.device)),
            "heldout": (hx.to(self.device), hy.to(self.device)),
        }

        if config.fine_tune and config.epochs > 0:
            self._fine_tune()

        # pristine parameter copies; masking always starts from these
        self._pristine: dict[str, torch.Tensor] = {}
        for i, block in enumerate(self.model.blocks):
            self._pristine[f"{i}.fc1.weight"] = block.fc1.weight.detach().clone()
            self._pristine[f"{i}.fc1.bias"] = block.fc1.bias.detach().clone()
            self._pristine[f"{i}.fc2.weight"] = block.fc2.weight.detach().clone()

        self._profile_doc: dict | None = None

    # ------------------------------------------------------------- training

    def _fine_tune(self) -> None:
        cfg = self.config
        image = GEOMETRIES[cfg.model]["image"]
        gen = torch.Generator().manual_seed(cfg.seed + 1)
        n_train = max(cfg.proxy_size, 512)
        if cfg.dataset == "synthetic":
            images = torch.randn(n_train, 3, image, image, generator=gen)
            teacher = torch.randn(3 * image * image, 10, generator=gen)
            labels = (images.flatten(1) @ teacher).argmax(dim=1)
        else:
            from torchvision import datasets, transforms

            tf = transforms.Compose(
                [
                    transforms.ToTensor(),
                    transforms.Normalize(
                        (0.4914, 0.4822, 0.4465), (0.247, 0.243, 0.261)
                    ),
                ]
            )
            train = datasets.CIFAR10(cfg.data_root, train=True, download=False, transform=tf)
            order = torch.randperm(len(train), generator=gen)[:n_train]
            images = torch.stack([train[i][0] for i in order.tolist()])
            labels = torch.tensor([train[i][1] for i in order.tolist()])
        images, labels = images.to(self.device), labels.to(self.device)

        self.model.train()
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=1e-4, weight_decay=0.05)
        loss_fn = nn.CrossEntropyLoss()
        for _ in range(cfg.epochs):
            for start in range(0, images.shape[0], cfg.batch_size):
                batch = images[start : start + cfg.batch_size]
                target = labels[start : start + cfg.batch_size]
                optimizer.zero_grad()
                loss_fn(self.model(batch), target).backward()
                optimizer.step()
        self.model.eval()

    # -------------------------------------------------------------- profile

    def _taylor_scores(self) -> list[torch.Tensor]:
        cfg = self.config
        images, labels = self.splits["proxy"]
        n = min(cfg.calibration_batches * cfg.batch_size, images.shape[0])
        loss_fn = nn.CrossEntropyLoss()
        self.model.zero_grad(set_to_none=True)
        for start in range(0, n, cfg.batch_size):
            batch = images[start : start + cfg.batch_size]
            target = labels[start : start + cfg.batch_size]
            loss = loss_fn(self.model(batch), target)
            loss.backward()
        scores = []
        with torch.no_grad():
            for block in self.model.blocks:
                gw1 = block.fc1.weight.grad
                gb1 = block.fc1.bias.grad
                gw2 = block.fc2.weight.grad
                contribution = (
                    (gw1 * block.fc1.weight).sum(dim=1)
                    + gb1 * block.fc1.bias
                    + (gw2 * block.fc2.weight).sum(dim=0)
                )
                scores.append(contribution.abs().detach().clone())
        self.model.zero_grad(set_to_none=True)
        return scores

    def describe(self) -> dict:
        """Profile document; computed once, stable for the session."""
        if self._profile_doc is None:
            taylor = self._taylor_scores()
            layers = []
            for i, block in enumerate(self.model.blocks):
                magnitude = block.fc1.weight.detach().norm(dim=1)
                layers.append(
                    {
                        "layer_id": f"blocks.{i}.mlp.fc1",
                        "magnitude": magnitude.cpu().tolist(),
                        "taylor": taylor[i].cpu().tolist(),
                    }
                )
            self._profile_doc = {"layers": layers}
        return self._profile_doc

    # ------------------------------------------------------------- masking

    def _hidden_size(self) -> int:
        return self.model.blocks[0].fc1.weight.shape[0]

    def _apply_mask(self, kept: dict[str, list[int]]) -> None:
        hidden = self._hidden_size()
        masks = {}
        known = {f"blocks.{i}.mlp.fc1": i for i in range(len(self.model.blocks))}
        for lid in kept:
            if lid not in known:
                raise ValueError(f"unknown layer {lid!r}")
        for lid, i in known.items():
            idx = kept.get(lid, list(range(hidden)))
            mask = torch.zeros(hidden)
            for c in idx:
                if not (0 <= int(c) < hidden):
                    raise ValueError(f"channel index {c} out of range for {lid!r}")
                mask[int(c)] = 1.0
            masks[i] = mask.to(self.device)
        with torch.no_grad():
            for i, block in enumerate(self.model.blocks):
                m = masks[i]
                block.fc1.weight.copy_(self._pristine[f"{i}.fc1.weight"] * m[:, None])
                block.fc1.bias.copy_(self._pristine[f"{i}.fc1.bias"] * m)
                block.fc2.weight.copy_(self._pristine[f"{i}.fc2.weight"] * m[None, :])

    def _restore(self) -> None:
        with torch.no_grad():
            for i, block in enumerate(self.model.blocks):
                block.fc1.weight.copy_(self._pristine[f"{i}.fc1.weight"])
                block.fc1.bias.copy_(self._pristine[f"{i}.fc1.bias"])
                block.fc2.weight.copy_(self._pristine[f"{i}.fc2.weight"])

    # ------------------------------------------------------------ accuracy

    def _split_accuracy(self, split: str) -> float:
        images, labels = self.splits[split]
        correct = 0
        self.model.eval()
        with torch.no_grad():
            for start in range(0, images.shape[0], _EVAL_CHUNK):
                logits = self.model(images[start : start + _EVAL_CHUNK])
                correct += int(
                    (logits.argmax(dim=1) == labels[start : start + _EVAL_CHUNK]).sum()
                )
        return correct / images.shape[0]

    def evaluate(self, kept: dict[str, list[int]], split: str) -> float:
        if split not in self.splits:
            raise ValueError(f"unknown split {split!r}")
        self._apply_mask(kept)
        try:
            return self._split_accuracy(split)
        finally:
            self._restore()
