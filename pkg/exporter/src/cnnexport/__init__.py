"""Exports trained ConvNet checkpoints as descriptor + CNNW bundles, fetches
MNIST with checksum verification, and generates deterministic test fixtures.
"""

from .cnnw import ContainerError, read_container, write_container
from .export import ExportError, export_model, validate_supported
from .fixtures import make_fixtures, slice_training_set
from .lenet import LeNet5, evaluate, load_split, train
from .mnist_fetch import FILES, FetchError, fetch_mnist

__version__ = "0.1.0"
