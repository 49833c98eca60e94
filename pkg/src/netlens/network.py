"""Layer graph, VGG-16 builder, forward tracing and input gradients.

A network is an ordered list of layer specifications over a declared
input shape plus a class manifest mapping output channels to labels.
The classifier stage is fully convolutional: dense weight matrices are
converted with :func:`densify_to_conv`, so spatially larger inputs are
legal after conversion and simply yield a score map per class.

Class scores are always the PRE-softmax values; gradients and relevance
both seed from them (softmax would couple the classes).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ArgumentError, DimensionError, WeightStoreError
from .kernels import ConvParams
from .tensor import STORAGE_DTYPE, freeze

CONV, MAXPOOL, AVGPOOL, RELU, SOFTMAX = "conv", "maxpool", "avgpool", "relu", "softmax"
LAYER_KINDS = (CONV, MAXPOOL, AVGPOOL, RELU, SOFTMAX)

INPUT_NAME = "input"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the graph. Only conv layers carry parameters."""

    name: str
    kind: str
    kernel_shape: tuple = None  # (Cout, Cin, kh, kw), conv only
    params: ConvParams = None  # conv only
    has_bias: bool = True  # conv only
    window: int = 2  # pooling only
    stride: int = 2  # pooling only

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ArgumentError(f"unknown layer kind {self.kind!r}")
        if self.kind == CONV:
            if self.kernel_shape is None or len(self.kernel_shape) != 4:
                raise ArgumentError(f"conv layer {self.name!r} needs a 4-D kernel shape")
            if self.params is None:
                object.__setattr__(self, "params", ConvParams())


def conv_spec(name, cout, cin, kh, kw, stride=1, padding=0, has_bias=True):
    return LayerSpec(
        name,
        CONV,
        kernel_shape=(cout, cin, kh, kw),
        params=ConvParams(stride=stride, padding=padding),
        has_bias=has_bias,
    )


@dataclass(frozen=True)
class NetworkDef:
    """Ordered layers + declared input shape + class manifest."""

    layers: tuple
    input_shape: tuple  # (C, H, W)
    class_manifest: tuple

    def __post_init__(self):
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ArgumentError("layer names must be unique within a network")
        if INPUT_NAME in names:
            raise ArgumentError(f"{INPUT_NAME!r} is reserved for the input entry")
        shapes = self.infer_shapes(self.input_shape)
        out_channels = shapes[-1][0]
        if out_channels != len(self.class_manifest):
            raise ArgumentError(
                f"network has {out_channels} output channels but the class "
                f"manifest lists {len(self.class_manifest)} labels"
            )

    @property
    def num_classes(self):
        return len(self.class_manifest)

    def layer(self, name):
        for l in self.layers:
            if l.name == name:
                return l
        raise ArgumentError(f"no layer named {name!r}")

    def infer_shapes(self, input_shape):
        """Symbolic activation shapes, input first; raises on mismatch."""
        shapes = [tuple(input_shape)]
        cur = tuple(input_shape)
        for l in self.layers:
            c, h, w = cur
            if l.kind == CONV:
                cout, cin, kh, kw = l.kernel_shape
                if cin != c:
                    raise DimensionError(
                        f"layer {l.name!r} expects {cin} input channels, got {c}",
                        axis="channels",
                    )
                ho, wo = kernels.conv_output_hw(h, w, kh, kw, l.params)
                cur = (cout, ho, wo)
            elif l.kind in (MAXPOOL, AVGPOOL):
                if h % 2 or w % 2:
                    raise DimensionError(
                        f"layer {l.name!r} needs even extents, got {h}x{w}",
                        axis="height" if h % 2 else "width",
                    )
                cur = (c, h // 2, w // 2)
            else:  # relu, softmax
                cur = (c, h, w)
            shapes.append(cur)
        return shapes

    def conv_layers(self):
        return [l for l in self.layers if l.kind == CONV]

    def parameter_count(self):
        """Total kernel + bias parameters implied by the layer specs."""
        total = 0
        for l in self.conv_layers():
            cout = l.kernel_shape[0]
            total += int(np.prod(l.kernel_shape)) + (cout if l.has_bias else 0)
        return total


@dataclass
class WeightStore:
    """Parameters per conv layer name: (kernel, bias-or-None)."""

    entries: dict
    dtype: str = "f32le"
    provenance: str = ""

    def kernel(self, name):
        try:
            return self.entries[name][0]
        except KeyError:
            raise WeightStoreError(f"no weights stored for layer {name!r}") from None

    def bias(self, name):
        try:
            return self.entries[name][1]
        except KeyError:
            raise WeightStoreError(f"no weights stored for layer {name!r}") from None

    def astype(self, dtype):
        cast = {
            n: (freeze(k.astype(dtype)), None if b is None else freeze(b.astype(dtype)))
            for n, (k, b) in self.entries.items()
        }
        tag = "f32le" if np.dtype(dtype) == np.float32 else "f64"
        return WeightStore(cast, dtype=tag, provenance=self.provenance)

    def parameter_count(self):
        total = 0
        for k, b in self.entries.values():
            total += k.size + (0 if b is None else b.size)
        return total

    def validate_against(self, net):
        """Every conv layer needs exactly one matching-shape entry."""
        for l in net.conv_layers():
            if l.name not in self.entries:
                raise WeightStoreError(f"no weights stored for layer {l.name!r}")
            k, b = self.entries[l.name]
            if tuple(k.shape) != tuple(l.kernel_shape):
                raise WeightStoreError(
                    f"layer {l.name!r}: kernel shape {tuple(k.shape)} does not "
                    f"match spec {tuple(l.kernel_shape)}"
                )
            if l.has_bias and (b is None or b.shape != (l.kernel_shape[0],)):
                raise WeightStoreError(f"layer {l.name!r}: bias missing or mis-shaped")
            if not l.has_bias and b is not None:
                raise WeightStoreError(f"layer {l.name!r}: unexpected bias present")


@dataclass
class ForwardTrace:
    """Activations per layer, input first, softmax probabilities last.

    pre_softmax keeps the raw score map (K, Hs, Ws) separately since the
    softmax entry overwrites nothing but gradients and relevance need the
    unsquashed values.
    """

    entries: list  # [(name, activation)]
    pre_softmax: np.ndarray

    def activation(self, name):
        for n, a in self.entries:
            if n == name:
                return a
        raise ArgumentError(f"no activation named {name!r} in trace")

    def names(self):
        return [n for n, _ in self.entries]


def build_vgg16(num_classes, manifest):
    """VGG-16 with the dense classifier already expressed as convolutions.

    13 conv layers (64,64 | 128,128 | 256x3 | 512x3 | 512x3), each 3x3
    stride 1 pad 1 with ReLU, five 2x2/2 max pools, then fc6 as a 7x7
    convolution, fc7/fc8 as 1x1 convolutions, softmax last.
    """
    if num_classes < 1:
        raise ArgumentError(f"num_classes must be >= 1, got {num_classes}")
    if len(manifest) != num_classes:
        raise ArgumentError(
            f"manifest length {len(manifest)} does not match num_classes {num_classes}"
        )
    plan = [(1, 2, 64), (2, 2, 128), (3, 3, 256), (4, 3, 512), (5, 3, 512)]
    layers = []
    cin = 3
    for block, count, cout in plan:
        for k in range(1, count + 1):
            name = f"conv{block}_{k}"
            layers.append(conv_spec(name, cout, cin, 3, 3, stride=1, padding=1))
            layers.append(LayerSpec(f"relu{block}_{k}", RELU))
            cin = cout
        layers.append(LayerSpec(f"pool{block}", MAXPOOL))
    layers.append(conv_spec("fc6", 4096, 512, 7, 7))
    layers.append(LayerSpec("relu6", RELU))
    layers.append(conv_spec("fc7", 4096, 4096, 1, 1))
    layers.append(LayerSpec("relu7", RELU))
    layers.append(conv_spec("fc8", num_classes, 4096, 1, 1))
    layers.append(LayerSpec(SOFTMAX, SOFTMAX))
    return NetworkDef(tuple(layers), (3, 224, 224), tuple(manifest))


def densify_to_conv(weight_matrix, input_shape, name="dense", has_bias=True):
    """Rewrite a dense (out, in) matrix as an equivalent convolution.

    Over an input of exactly ``input_shape`` = (C, H, W) the returned
    (out, C, H, W) kernel with stride 1 / no padding produces a 1x1
    spatial output identical to the matrix product; later dense layers
    over 1x1 inputs therefore become 1x1 convolutions.
    """
    out_features, in_features = weight_matrix.shape
    c, h, w = input_shape
    if in_features != c * h * w:
        raise DimensionError(
            f"matrix expects {in_features} inputs but shape {input_shape} "
            f"flattens to {c * h * w}",
            axis="in_features",
        )
    kernel = freeze(np.ascontiguousarray(weight_matrix.reshape(out_features, c, h, w)))
    spec = conv_spec(name, out_features, c, h, w, stride=1, padding=0, has_bias=has_bias)
    return spec, kernel


def _check_input(net, x):
    c, h, w = net.input_shape
    if x.ndim != 3 or x.shape[0] != c:
        raise DimensionError(
            f"input shape {x.shape} does not provide {c} channels", axis="channels"
        )
    if x.shape[1] < h or x.shape[2] < w:
        raise DimensionError(
            f"input {x.shape[1]}x{x.shape[2]} is smaller than the declared "
            f"{h}x{w} (larger is allowed, smaller is not)",
            axis="height" if x.shape[1] < h else "width",
        )


def _run_layers(net, weights, x, keep_ctx):
    """Shared forward walk. Returns (entries, pre_softmax, contexts).

    contexts[i] is whatever layer i's vjp needs: the conv kernel, the
    max-pool argmax, or the relu input.
    """
    _check_input(net, x)
    entries = [(INPUT_NAME, x)]
    contexts = [] if keep_ctx else None
    pre_softmax = None
    cur = x
    for l in net.layers:
        ctx = None
        if l.kind == CONV:
            kernel = weights.kernel(l.name)
            bias = weights.bias(l.name) if l.has_bias else None
            if kernel.shape[1] != cur.shape[0]:
                raise DimensionError(
                    f"layer {l.name!r} expects {kernel.shape[1]} channels, "
                    f"got {cur.shape[0]}",
                    axis="channels",
                )
            out = kernels.conv2d(cur, kernel, bias, l.params)
            ctx = ("conv", cur.shape, kernel, l.params)
        elif l.kind == MAXPOOL:
            out, argmax = kernels.maxpool2d(cur)
            ctx = ("maxpool", cur.shape, argmax)
        elif l.kind == AVGPOOL:
            out = kernels.avgpool2d(cur)
            ctx = ("avgpool", cur.shape)
        elif l.kind == RELU:
            out = kernels.relu(cur)
            ctx = ("relu", cur)
        else:  # softmax over channels, per spatial cell
            pre_softmax = cur
            out = kernels.channel_softmax(cur)
            ctx = ("softmax", None)
        entries.append((l.name, out))
        if keep_ctx:
            contexts.append(ctx)
        cur = out
    if pre_softmax is None:
        pre_softmax = cur  # no softmax layer: scores are the last activation
    return entries, pre_softmax, contexts


def forward(net, weights, x):
    """Run the network, collecting every intermediate activation."""
    entries, pre_softmax, _ = _run_layers(net, weights, x, keep_ctx=False)
    return ForwardTrace(entries, pre_softmax)


def class_score(pre_softmax, class_index):
    """Scalar score of one class: spatial mean of its score map.

    For the declared input size the map is 1x1 and this is simply the
    score value.
    """
    return float(np.mean(pre_softmax[class_index]))


def classify(net, weights, x, top_k):
    """Ranked (label, score, probability) triples, best first.

    Ordered by descending pre-softmax score, ties broken by ascending
    class index.
    """
    if top_k < 1 or top_k > net.num_classes:
        raise ArgumentError(
            f"top_k must be in 1..{net.num_classes}, got {top_k}"
        )
    trace = forward(net, weights, x)
    scores = np.array([class_score(trace.pre_softmax, i) for i in range(net.num_classes)])
    probs = kernels.softmax(scores)
    order = sorted(range(net.num_classes), key=lambda i: (-scores[i], i))
    return [
        (net.class_manifest[i], float(scores[i]), float(probs[i])) for i in order[:top_k]
    ]


def _seed_upstream(pre_softmax, class_index):
    up = np.zeros_like(pre_softmax)
    cells = pre_softmax.shape[1] * pre_softmax.shape[2]
    up[class_index] = 1.0 / cells
    return up


def _backward(net, contexts, upstream, stop_at=None):
    """Chain vjps top-down; optionally stop at a named layer's output.

    Returns the gradient with respect to that layer's output (or the
    network input when stop_at is None).
    """
    grad = upstream
    for l, ctx in zip(reversed(net.layers), reversed(contexts)):
        if stop_at is not None and l.name == stop_at:
            return grad
        kind = ctx[0]
        if kind == "conv":
            _, in_shape, kernel, params = ctx
            grad = kernels.vjp_conv2d(kernel, grad, in_shape, params)
        elif kind == "maxpool":
            _, in_shape, argmax = ctx
            grad = kernels.vjp_maxpool2d(argmax, grad, in_shape)
        elif kind == "avgpool":
            _, in_shape = ctx
            grad = kernels.vjp_avgpool2d(grad, in_shape)
        elif kind == "relu":
            grad = kernels.vjp_relu(ctx[1], grad)
        # softmax: gradients are of the pre-softmax score, skip
    if stop_at is not None:
        raise ArgumentError(f"no layer named {stop_at!r}")
    return grad


def input_gradient(net, weights, x, target_class):
    """Gradient of the target pre-softmax score w.r.t. the input pixels."""
    if not 0 <= target_class < net.num_classes:
        raise ArgumentError(
            f"target_class must be in 0..{net.num_classes - 1}, got {target_class}"
        )
    _, pre_softmax, contexts = _run_layers(net, weights, x, keep_ctx=True)
    return _backward(net, contexts, _seed_upstream(pre_softmax, target_class))


def activation_gradient(net, weights, x, target_class, layer_name):
    """Gradient of the target pre-softmax score w.r.t. a layer's output."""
    if not 0 <= target_class < net.num_classes:
        raise ArgumentError(
            f"target_class must be in 0..{net.num_classes - 1}, got {target_class}"
        )
    if net.layer(layer_name).kind == SOFTMAX:
        raise ArgumentError("gradients are taken pre-softmax; pick an earlier layer")
    _, pre_softmax, contexts = _run_layers(net, weights, x, keep_ctx=True)
    return _backward(
        net, contexts, _seed_upstream(pre_softmax, target_class), stop_at=layer_name
    )


def random_weights(net, seed=0, scale=None, with_bias=True, dtype=STORAGE_DTYPE, loc=0.0):
    """He-style random weight store for tests and demos.

    ``loc`` shifts the weight mean; conservation suites use a positive
    shift to keep pre-activations away from zero.
    """
    rng = np.random.default_rng(seed)
    entries = {}
    for l in net.conv_layers():
        cout, cin, kh, kw = l.kernel_shape
        s = scale if scale is not None else (1.0 / np.sqrt(cin * kh * kw))
        kernel = rng.normal(loc, s, size=l.kernel_shape)
        bias = rng.normal(0.0, s, size=(cout,)) if (with_bias and l.has_bias) else None
        entries[l.name] = (
            freeze(kernel.astype(dtype)),
            None if bias is None else freeze(bias.astype(dtype)),
        )
    tag = "f32le" if np.dtype(dtype) == np.float32 else "f64"
    return WeightStore(entries, dtype=tag, provenance=f"random(seed={seed})")


def zero_weights(net, dtype=STORAGE_DTYPE):
    """All-zero kernels and biases matching the network's conv layers."""
    entries = {}
    for l in net.conv_layers():
        kernel = freeze(np.zeros(l.kernel_shape, dtype=dtype))
        bias = freeze(np.zeros(l.kernel_shape[0], dtype=dtype)) if l.has_bias else None
        entries[l.name] = (kernel, bias)
    return WeightStore(entries, provenance="zeros")


def strip_bias(net):
    """Copy of the network with has_bias cleared on every conv layer."""
    layers = tuple(
        replace(l, has_bias=False) if l.kind == CONV else l for l in net.layers
    )
    return NetworkDef(layers, net.input_shape, net.class_manifest)


def network_to_dict(net):
    """JSON-serializable description of a network (manifest included)."""
    layers = []
    for l in net.layers:
        d = {"name": l.name, "kind": l.kind}
        if l.kind == CONV:
            d["kernel_shape"] = list(l.kernel_shape)
            d["stride"] = l.params.stride
            d["padding"] = l.params.padding
            d["has_bias"] = l.has_bias
        layers.append(d)
    return {
        "input_shape": list(net.input_shape),
        "class_manifest": list(net.class_manifest),
        "layers": layers,
    }


def network_from_dict(data, class_manifest=None):
    """Rebuild a NetworkDef; an explicit manifest overrides the stored one."""
    layers = []
    for d in data["layers"]:
        if d["kind"] == CONV:
            cout, cin, kh, kw = d["kernel_shape"]
            layers.append(
                conv_spec(
                    d["name"], cout, cin, kh, kw,
                    stride=d.get("stride", 1),
                    padding=d.get("padding", 0),
                    has_bias=d.get("has_bias", True),
                )
            )
        else:
            layers.append(LayerSpec(d["name"], d["kind"]))
    manifest = class_manifest if class_manifest is not None else data["class_manifest"]
    return NetworkDef(tuple(layers), tuple(data["input_shape"]), tuple(manifest))
