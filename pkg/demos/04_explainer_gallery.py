"""The three gradient/perturbation explainers side by side on one toy
network: Grad-CAM, occlusion analysis and SmoothGrad, all rendered with
the shared red/blue colormap into demos/out/.

Run: python demos/04_explainer_gallery.py
"""

import os

import numpy as np

from netlens import (
    LayerSpec,
    NetworkDef,
    conv_spec,
    encode_ppm,
    grad_cam,
    occlusion_map,
    occlusion_to_pixels,
    random_weights,
    render_heatmap,
    smoothgrad,
    upsample_map,
)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

net = NetworkDef(
    (
        conv_spec("conv1", 6, 3, 3, 3, padding=1, has_bias=False),
        LayerSpec("relu1", "relu"),
        LayerSpec("pool1", "maxpool"),
        conv_spec("readout", 2, 6, 8, 8, has_bias=False),
        LayerSpec("softmax", "softmax"),
    ),
    (3, 16, 16),
    ("background", "object"),
)
weights = random_weights(net, seed=3, with_bias=False, loc=0.4, scale=0.2)
rng = np.random.default_rng(2)
x = rng.uniform(0.2, 1.0, (3, 16, 16))
x[:, 3:8, 9:14] += 1.2

target = 1


def save(smap, name, note):
    img = render_heatmap(smap, clip_percentile=99.0)
    path = os.path.join(OUT, name)
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))
    print(f"  {name:<28} {smap.values.shape}  {note}")


print("artifacts land in demos/out/:\n")

cam = grad_cam(net, weights, x, target, "conv1")
save(cam, "gradcam_conv1.ppm", "feature maps weighted by mean score gradient")
save(upsample_map(cam, 16, 16), "gradcam_upsampled.ppm", "bilinear, input-sized")

occ = occlusion_map(net, weights, x, target, patch=4, stride=2, baseline=0.0)
save(occ, "occlusion_cells.ppm", "score drop per occluded patch position")
save(occlusion_to_pixels(occ, patch=4, stride=2, height=16, width=16),
     "occlusion_pixels.ppm", "overlapping patches averaged per pixel")

sg = smoothgrad(net, weights, x, target, samples=25, sigma=0.15, seed=11)
save(sg, "smoothgrad.ppm", "mean input gradient over 25 noisy copies")

sg_again = smoothgrad(net, weights, x, target, samples=25, sigma=0.15, seed=11)
assert sg.values.tobytes() == sg_again.values.tobytes()
print("\nsame seed, same bytes: the SmoothGrad noise stream is fully "
      "determined by the explicit seed.")
