"""LeNet-5-class MNIST model: definition, deterministic training, evaluation.

Two conv + two fully connected layers, ReLU nonlinearities, 2x2 max pooling,
28x28 inputs scaled to [0, 1] with no mean subtraction (the consuming
toolkit uses the same preprocessing, recorded in the export manifest).
"""
from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import idx


class LeNet5(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 20, 5)
        self.conv2 = nn.Conv2d(20, 50, 5)
        self.fc1 = nn.Linear(50 * 4 * 4, 500)
        self.fc2 = nn.Linear(500, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        x = F.max_pool2d(F.relu(self.conv2(x)), 2)
        x = torch.flatten(x, 1)
        x = F.relu(self.fc1(x))
        return self.fc2(x)


def load_split(images_path, labels_path) -> tuple[torch.Tensor, torch.Tensor]:
    images = idx.read_images(images_path).astype(np.float32) / 255.0
    labels = idx.read_labels(labels_path).astype(np.int64)
    return torch.from_numpy(images).unsqueeze(1), torch.from_numpy(labels)


@torch.no_grad()
def evaluate(model: nn.Module, images: torch.Tensor, labels: torch.Tensor,
             batch_size: int = 1000) -> float:
    model.eval()
    hits = 0
    for i in range(0, images.shape[0], batch_size):
        logits = model(images[i : i + batch_size])
        hits += int((logits.argmax(1) == labels[i : i + batch_size]).sum())
    return hits / images.shape[0]


def train(
    train_images: torch.Tensor,
    train_labels: torch.Tensor,
    test_images: torch.Tensor,
    test_labels: torch.Tensor,
    epochs: int = 8,
    batch_size: int = 128,
    lr: float = 1e-3,
    seed: int = 1,
    log=print,
) -> LeNet5:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    model = LeNet5()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=5, gamma=0.2)
    rng = np.random.default_rng(seed)
    n = train_images.shape[0]
    for epoch in range(epochs):
        model.train()
        order = torch.from_numpy(rng.permutation(n))
        total_loss = 0.0
        for i in range(0, n, batch_size):
            batch = order[i : i + batch_size]
            optimizer.zero_grad()
            loss = F.cross_entropy(model(train_images[batch]), train_labels[batch])
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * batch.shape[0]
        scheduler.step()
        acc = evaluate(model, test_images, test_labels)
        log(f"epoch {epoch + 1}/{epochs}: loss {total_loss / n:.4f} "
            f"test accuracy {acc:.4f}")
    return model
