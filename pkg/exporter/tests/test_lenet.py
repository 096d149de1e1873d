import numpy as np
import torch

from cnnexport import idx
from cnnexport.lenet import LeNet5, evaluate, load_split, train


def test_forward_shape():
    torch.manual_seed(0)
    model = LeNet5()
    out = model(torch.rand(3, 1, 28, 28))
    assert out.shape == (3, 10)


def test_load_split_scales_pixels(tmp_path):
    images = np.zeros((4, 28, 28), dtype=np.uint8)
    images[0, 0, 0] = 255
    idx.write_images(images, tmp_path / "imgs")
    idx.write_labels(np.array([1, 2, 3, 4], dtype=np.uint8), tmp_path / "lbls")
    x, y = load_split(tmp_path / "imgs", tmp_path / "lbls")
    assert x.shape == (4, 1, 28, 28)
    assert float(x[0, 0, 0, 0]) == 1.0
    assert y.tolist() == [1, 2, 3, 4]


def test_training_loop_learns_a_separable_toy_problem():
    # class 0: bright top half, class 1: bright bottom half
    torch.manual_seed(0)
    rng = np.random.default_rng(0)
    n = 128
    images = rng.random((n, 1, 28, 28)).astype(np.float32) * 0.1
    labels = rng.integers(0, 2, n)
    for i, label in enumerate(labels):
        if label == 0:
            images[i, 0, :14] += 0.8
        else:
            images[i, 0, 14:] += 0.8
    x = torch.from_numpy(images)
    y = torch.from_numpy(labels.astype(np.int64))
    model = train(x, y, x, y, epochs=3, batch_size=32, seed=0, log=lambda *_: None)
    assert evaluate(model, x, y) >= 0.95


def test_training_is_seed_deterministic():
    rng = np.random.default_rng(1)
    x = torch.from_numpy(rng.random((64, 1, 28, 28)).astype(np.float32))
    y = torch.from_numpy(rng.integers(0, 10, 64).astype(np.int64))
    a = train(x, y, x, y, epochs=1, batch_size=16, seed=5, log=lambda *_: None)
    b = train(x, y, x, y, epochs=1, batch_size=16, seed=5, log=lambda *_: None)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
