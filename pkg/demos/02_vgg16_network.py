"""The VGG-16 graph: structure, dense-to-conv conversion, forward traces
and the fully-convolutional payoff (score maps for larger inputs).

The full 138M-parameter network is built only with --full (a few
seconds and ~0.5 GB); the default walk uses the layer specs alone.

Run: python demos/02_vgg16_network.py [--full]
"""

import argparse

import numpy as np

from netlens import build_vgg16, densify_to_conv, forward, random_weights

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true",
                    help="materialize random weights and run real forwards")
args = parser.parse_args()

net = build_vgg16(1000, tuple(f"class{i:04d}" for i in range(1000)))

print("== Layer plan ==")
shapes = net.infer_shapes((3, 224, 224))
for layer, shape in zip(net.layers, shapes[1:]):
    marker = f" kernel {layer.kernel_shape}" if layer.kind == "conv" else ""
    print(f"  {layer.name:<10} {layer.kind:<8} -> {shape}{marker}")
print(f"\nparameters: {net.parameter_count():,d} "
      f"({net.parameter_count() * 4 / 1e6:.0f} MB as f32)")

print("\n== Dense-to-convolution conversion ==")
matrix = np.arange(12.0).reshape(3, 4)
spec, kernel = densify_to_conv(matrix, (1, 2, 2), name="tiny_fc")
print(f"a 3x4 dense matrix over a (1,2,2) input becomes a conv kernel "
      f"{kernel.shape} (stride {spec.params.stride}, padding {spec.params.padding})")
print("fc6 of VGG-16 converts the same way: 4096x25088 -> (4096, 512, 7, 7)")

if args.full:
    print("\n== Real forwards (random weights) ==")
    weights = random_weights(net, seed=0, scale=0.05)
    t224 = forward(net, weights, np.zeros((3, 224, 224), dtype=np.float32))
    print(f"224x224 input -> pre-softmax map {t224.pre_softmax.shape}")
    t256 = forward(net, weights, np.zeros((3, 256, 256), dtype=np.float32))
    print(f"256x256 input -> pre-softmax map {t256.pre_softmax.shape} "
          f"(fully convolutional: one score per 32-pixel step)")
else:
    print("\n(re-run with --full to materialize weights and run real forwards)")
