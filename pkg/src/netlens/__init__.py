"""netlens: convolutional inference with pixel-level explanations.

A self-contained numpy engine that classifies images with a VGG-16
shaped network and explains each decision via layer-wise relevance
propagation, Grad-CAM, occlusion analysis and SmoothGrad, rendering
signed red/blue heatmaps and standard classification-quality reports.
"""

from .errors import (
    ArgumentError,
    BlobSizeError,
    ChecksumError,
    ConfigError,
    CsvError,
    DimensionError,
    NetlensError,
    NumericalError,
    PpmError,
    UndefinedMetricError,
    UnknownDtypeError,
    WeightFormatError,
    WeightStoreError,
)
from .tensor import STORAGE_DTYPE, VERIFY_DTYPE, tensor
from .kernels import (
    ConvParams,
    avgpool2d,
    conv2d,
    maxpool2d,
    relu,
    softmax,
    vjp_avgpool2d,
    vjp_conv2d,
    vjp_maxpool2d,
    vjp_relu,
)
from .network import (
    ForwardTrace,
    LayerSpec,
    NetworkDef,
    WeightStore,
    activation_gradient,
    build_vgg16,
    classify,
    conv_spec,
    densify_to_conv,
    forward,
    input_gradient,
    network_from_dict,
    network_to_dict,
    random_weights,
    zero_weights,
)
from .weightio import (
    inspect_weights,
    load_class_manifest,
    load_weights,
    save_class_manifest,
    save_weights,
)
from .lrp import (
    RelevanceTrace,
    RuleAssignment,
    ZBRule,
    ZRule,
    canonicalize_for_lrp,
    export_relevance_trace,
    lrp,
    lrp_linear_rule,
    lrp_zb_rule,
    mask_top_relevance,
    pixel_relevance,
    pool_relevance_channels,
)
from .saliency import SaliencyMap, render_heatmap, upsample_map
from .explainers import (
    GradCamContext,
    grad_cam,
    occlusion_map,
    occlusion_to_pixels,
    smoothgrad,
)
from .metrics import (
    ClassificationReport,
    ConfusionMatrix,
    ScoredSample,
    confusion,
    evaluate_csv,
    format_confusion,
    format_report,
    report,
    roc_auc,
)
from .imagepipe import (
    NormalizationSpec,
    RgbImage,
    decode_ppm,
    encode_ppm,
    overlay,
    resize_bilinear,
    to_input_tensor,
)
from .selftest import run_selftest

__version__ = "0.1.0"
