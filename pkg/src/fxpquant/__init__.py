"""Fixed-point ConvNet quantization simulator with bit-width search and a
first-order relative energy model (precision scaling + computation skipping).
"""

from .calibrate import (
    CalibrationProfile,
    LayerCalibration,
    PER_LAYER,
    POLICIES,
    UNIFORM,
    calibrate,
    scales_from_profile,
)
from .energy import (
    CaseEntry,
    CaseStudy,
    EnergyCoefficients,
    EnergyModelError,
    EnergyReport,
    case_report,
    layer_energy,
    mac_energy,
    network_energy,
)
from .engine import (
    EngineError,
    EvalResult,
    LayerQuant,
    LayerTrace,
    QuantConfig,
    count_skips,
    evaluate_accuracy,
    forward,
)
from .graph import (
    Conv2D,
    FullyConnected,
    GraphError,
    LayerWeights,
    MaxPool,
    NetworkGraph,
    ReLU,
    accumulation_depth,
    infer_shapes,
    is_weight_bearing,
    mac_count,
)
from .bundleio import BundleError, load_model, read_weights, save_model, write_weights
from .mnist import IdxFormatError, LabeledDataset, load_mnist
from .quantize import (
    MAX_BITS,
    MIN_SCALE,
    QuantSpec,
    QuantizedTensor,
    fake_quantize,
    next_pow2_scale,
    quantize,
    quantize_tensor,
    zero_fraction,
)
from .results import ResultsDocument, read_profile, read_results, write_profile, write_results
from .search import (
    GreedyResult,
    OperatingPoint,
    SearchError,
    SearchSettings,
    greedy_search,
    uniform_sweep,
)

__version__ = "0.1.0"
