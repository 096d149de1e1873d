import numpy as np
import pytest

from fxpquant import (
    Conv2D,
    FullyConnected,
    LabeledDataset,
    LayerWeights,
    MaxPool,
    NetworkGraph,
    ReLU,
)

FIXTURES = __import__("pathlib").Path(__file__).resolve().parent.parent / "fixtures"


def build_tiny_conv_net(seed=0):
    """1x6x6 -> conv(2, 3x3) -> relu -> maxpool(2,2) -> fc(3)."""
    rng = np.random.default_rng(seed)
    return NetworkGraph(
        (1, 6, 6),
        (
            ("conv", Conv2D(2, 3, 3, stride=1, pad=0)),
            ("act", ReLU()),
            ("pool", MaxPool(2, 2)),
            ("fc", FullyConnected(3)),
        ),
        {
            "conv": LayerWeights(rng.normal(0, 0.3, (2, 1, 3, 3)),
                                 rng.normal(0, 0.05, (2,))),
            "fc": LayerWeights(rng.normal(0, 0.3, (3, 8)),
                               rng.normal(0, 0.05, (3,))),
        },
    )


def build_toy_fc_net(seed=3, hidden=8, classes=4, side=4):
    """Two FC layers with a ReLU between: the greedy-search workbench."""
    rng = np.random.default_rng(seed)
    in_features = side * side
    return NetworkGraph(
        (1, side, side),
        (
            ("fc1", FullyConnected(hidden)),
            ("act1", ReLU()),
            ("fc2", FullyConnected(classes)),
        ),
        {
            "fc1": LayerWeights(rng.normal(0, 0.4, (hidden, in_features)),
                                rng.normal(0, 0.05, (hidden,))),
            "fc2": LayerWeights(rng.normal(0, 0.4, (classes, hidden)),
                                rng.normal(0, 0.05, (classes,))),
        },
    )


def build_prototype_dataset(net, n_per_class=16, noise=0.02, seed=11):
    """Separable synthetic dataset: class prototypes plus small noise.

    The float network does not classify these perfectly in general, but the
    labels are deterministic and accuracy is a meaningful, reproducible
    quantization-sensitivity signal. For search tests the labels are taken
    from the float network's own predictions so float accuracy is exactly 1.
    """
    rng = np.random.default_rng(seed)
    shape = net.input_shape
    classes = 4
    prototypes = rng.random((classes, *shape))
    images = []
    for c in range(classes):
        for _ in range(n_per_class):
            images.append(np.clip(prototypes[c] + rng.normal(0, noise, shape), 0, 1))
    images = np.asarray(images)
    # label with the float net's own argmax -> float accuracy == 1.0
    from fxpquant import QuantConfig
    from fxpquant.engine import _prepare_layers, _run_batch

    cfg = QuantConfig.float_mode()
    logits, _ = _run_batch(net, images, cfg, _prepare_layers(net, cfg), False)
    return LabeledDataset(images, np.argmax(logits, axis=1).astype(np.int64))


@pytest.fixture
def tiny_conv_net():
    return build_tiny_conv_net()


@pytest.fixture
def toy_fc_net():
    return build_toy_fc_net()


@pytest.fixture
def toy_dataset(toy_fc_net):
    return build_prototype_dataset(toy_fc_net)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def lenet_bundle(fixtures_dir):
    d = fixtures_dir / "lenet5"
    if not (d / "lenet5.yaml").exists():
        pytest.skip("LeNet-5 fixture bundle not present (run the exporter)")
    from fxpquant import load_model

    return load_model(d / "lenet5.yaml", d / "lenet5.cnnw")


@pytest.fixture(scope="session")
def mnist_validation(fixtures_dir):
    d = fixtures_dir / "mnist"
    if not (d / "t10k-images-idx3-ubyte").exists():
        pytest.skip("MNIST validation fixture not present")
    from fxpquant import load_mnist

    return load_mnist(d / "t10k-images-idx3-ubyte", d / "t10k-labels-idx1-ubyte")


@pytest.fixture(scope="session")
def mnist_train_slice(fixtures_dir):
    d = fixtures_dir / "mnist"
    if not (d / "train-slice-images-idx3-ubyte").exists():
        pytest.skip("MNIST training-slice fixture not present")
    from fxpquant import load_mnist

    return load_mnist(d / "train-slice-images-idx3-ubyte",
                      d / "train-slice-labels-idx1-ubyte")
