"""Datasets: a fully seeded synthetic classification task plus optional CIFAR-10.

The synthetic task draws Gaussian images and labels them with a fixed random
linear teacher over the flattened pixels, so the labels carry learnable
structure and every split is reproducible from the seed alone.
"""
from __future__ import annotations

import torch


def synthetic_split(
    seed: int, proxy_size: int, heldout_size: int, image: int = 32, classes: int = 10
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    gen = torch.Generator().manual_seed(seed)
    total = proxy_size + heldout_size
    images = torch.randn(total, 3, image, image, generator=gen)
    teacher = torch.randn(3 * image * image, classes, generator=gen)
    labels = (images.flatten(1) @ teacher).argmax(dim=1)
    return (
        images[:proxy_size],
        labels[:proxy_size],
        images[proxy_size:],
        labels[proxy_size:],
    )


def cifar10_split(
    root: str, seed: int, proxy_size: int, heldout_size: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Disjoint proxy/held-out splits of the CIFAR-10 test set, fixed once."""
    try:
        from torchvision import datasets, transforms
    except ImportError as exc:
        raise RuntimeError("cifar10 dataset needs torchvision installed") from exc

    tf = transforms.Compose(
        [
            transforms.ToTensor(),
            transforms.Normalize((0.4914, 0.4822, 0.4465), (0.247, 0.243, 0.261)),
        ]
    )
    test = datasets.CIFAR10(root, train=False, download=False, transform=tf)
    if proxy_size + heldout_size > len(test):
        raise ValueError("split sizes exceed the dataset")
    order = torch.randperm(len(test), generator=torch.Generator().manual_seed(seed))
    images = torch.stack([test[i][0] for i in order.tolist()])
    labels = torch.tensor([test[i][1] for i in order.tolist()])
    return (
        images[:proxy_size],
        labels[:proxy_size],
        images[proxy_size : proxy_size + heldout_size],
        labels[proxy_size : proxy_size + heldout_size],
    )
