import json

import numpy as np
import pytest
import torch
import torch.nn as nn
import yaml

from cnnexport.cnnw import read_container
from cnnexport.export import ExportError, export_model, validate_supported
from cnnexport.lenet import LeNet5


@pytest.fixture
def model():
    torch.manual_seed(0)
    return LeNet5()


def test_export_writes_complete_bundle(model, tmp_path):
    manifest = export_model(model, tmp_path, name="lenet5")
    assert (tmp_path / "lenet5.yaml").exists()
    assert (tmp_path / "lenet5.cnnw").exists()
    assert (tmp_path / "lenet5.manifest.json").exists()
    assert len(manifest["tensors"]) == 8  # 4 layers x (weight, bias)
    descriptor = yaml.safe_load((tmp_path / "lenet5.yaml").read_text())
    assert descriptor["input_shape"] == [1, 28, 28]
    names = [layer["name"] for layer in descriptor["layers"]]
    assert names == ["conv1", "relu1", "pool1", "conv2", "relu2", "pool2",
                     "fc1", "relu3", "fc2"]


def test_reimport_matches_source_exactly(model, tmp_path):
    export_model(model, tmp_path, name="lenet5")
    entries = read_container(tmp_path / "lenet5.cnnw")
    state = model.state_dict()
    mapping = {
        "conv1.weight": "conv1.weight", "conv1.bias": "conv1.bias",
        "conv2.weight": "conv2.weight", "conv2.bias": "conv2.bias",
        "fc1.weight": "fc1.weight", "fc1.bias": "fc1.bias",
        "fc2.weight": "fc2.weight", "fc2.bias": "fc2.bias",
    }
    for container_key, torch_key in mapping.items():
        source = state[torch_key].numpy().astype(np.float32)
        diff = np.max(np.abs(entries[container_key] - source))
        assert diff == 0.0  # float32 round trip, bit for bit


def test_manifest_checksums_verify_against_container(model, tmp_path):
    import hashlib

    manifest = export_model(model, tmp_path, name="lenet5")
    entries = read_container(tmp_path / "lenet5.cnnw")
    for row in manifest["tensors"]:
        blob = np.ascontiguousarray(entries[row["name"]], dtype="<f4").tobytes()
        assert hashlib.sha256(blob).hexdigest() == row["sha256"]


def test_reference_logits_written_with_eval_data(model, tmp_path):
    torch.manual_seed(1)
    images = torch.rand(120, 1, 28, 28)
    labels = torch.randint(0, 10, (120,))
    manifest = export_model(model, tmp_path, name="lenet5",
                            test_images=images, test_labels=labels,
                            reference_count=100)
    assert "source_accuracy" in manifest
    ref = json.loads((tmp_path / "lenet5.reference.json").read_text())
    assert ref["count"] == 100
    got = np.asarray(ref["logits"])
    assert got.shape == (100, 10)
    with torch.no_grad():
        expected = model.double()(images[:100].double()).numpy()
    assert np.max(np.abs(got - expected)) == 0.0


def test_unsupported_layers_listed(tmp_path):
    class WithLRN(nn.Module):
        def __init__(self):
            super().__init__()
            self.conv1 = nn.Conv2d(1, 4, 3)
            self.norm1 = nn.LocalResponseNorm(5)

    with pytest.raises(ExportError, match="norm1.*LocalResponseNorm"):
        validate_supported(WithLRN())


def test_supported_leafs_pass():
    validate_supported(LeNet5())
