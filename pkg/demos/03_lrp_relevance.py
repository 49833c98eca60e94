"""Layer-wise relevance propagation end to end on a small network:
masked score seeding, per-layer conservation, pixel heatmap rendering.

Writes red/blue heatmap PPMs into demos/out/.

Run: python demos/03_lrp_relevance.py
"""

import os

import numpy as np

from netlens import (
    LayerSpec,
    NetworkDef,
    RuleAssignment,
    conv_spec,
    encode_ppm,
    forward,
    lrp,
    pixel_relevance,
    pool_relevance_channels,
    random_weights,
    render_heatmap,
)
from netlens.network import class_score

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

net = NetworkDef(
    (
        conv_spec("conv1", 6, 3, 3, 3, padding=1, has_bias=False),
        LayerSpec("relu1", "relu"),
        LayerSpec("pool1", "maxpool"),
        conv_spec("conv2", 8, 6, 3, 3, padding=1, has_bias=False),
        LayerSpec("relu2", "relu"),
        conv_spec("readout", 2, 8, 8, 8, has_bias=False),
        LayerSpec("softmax", "softmax"),
    ),
    (3, 16, 16),
    ("background", "object"),
)
weights = random_weights(net, seed=7, with_bias=False, loc=0.4, scale=0.2)

rng = np.random.default_rng(1)
x = rng.uniform(0.2, 1.0, (3, 16, 16))
x[:, 5:11, 5:11] += 1.0  # a bright block the readout will latch onto

score = class_score(forward(net, weights, x).pre_softmax, 1)
print(f"pre-softmax score for 'object': {score:.4f}")

print("\n== Relevance pass (pixel-bound rule at the input conv) ==")
rules = RuleAssignment.paper_default(net, low=(0.0,) * 3, high=(2.5,) * 3, epsilon=0.0)
trace = lrp(net, weights, x, target_class=1, rules=rules)

print(f"{'layer':<10}{'relevance sum':>16}{'drift vs score':>18}")
for name, total in trace.sums:
    print(f"{name:<10}{total:>16.6f}{abs(total - score) / score:>18.2e}")

print("\nmax pools were treated as average pools while redistributing; the "
      "totals above stay pinned to the true class score.")

heat = render_heatmap(pixel_relevance(trace), clip_percentile=99.0)
path = os.path.join(OUT, "lrp_pixel_heatmap.ppm")
with open(path, "wb") as fh:
    fh.write(encode_ppm(heat))
print(f"\npixel heatmap (red = evidence for 'object', blue = against): {path}")

mid = pool_relevance_channels(trace, "pool1")
mid_path = os.path.join(OUT, "lrp_pool1_heatmap.ppm")
with open(mid_path, "wb") as fh:
    fh.write(encode_ppm(render_heatmap(mid)))
print(f"mid-network relevance map at pool1: {mid_path}")
