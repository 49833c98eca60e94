"""Command-line front end: classify, explain, evaluate, selftest, weights.

Configuration lives in a JSON file (weights, class manifest, network
architecture, normalization, explainer parameters); flags override the
file. All outputs are written atomically (temp file + rename) and carry
no timestamps, so a rerun with identical inputs produces byte-identical
artifacts.

Exit codes: 0 success, 2 bad arguments/configuration, 3 file or parse
errors, 4 shape or weight-consistency errors.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import explainers, metrics
from .lrp import (
    DEFAULT_EPSILON,
    RuleAssignment,
    export_relevance_trace,
    lrp,
    pixel_relevance,
)
from .errors import (
    ArgumentError,
    ConfigError,
    CsvError,
    DimensionError,
    NetlensError,
    PpmError,
    UndefinedMetricError,
    WeightFormatError,
    WeightStoreError,
)
from .imagepipe import (
    NormalizationSpec,
    encode_ppm,
    overlay,
    read_ppm,
    resize_bilinear,
    to_input_tensor,
)
from .network import (
    build_vgg16,
    class_score,
    classify,
    forward,
    network_from_dict,
)
from .saliency import DEFAULT_CLIP_PERCENTILE, render_heatmap, upsample_map
from .selftest import CHECK_NAMES, run_selftest
from .weightio import (
    inspect_weights,
    load_class_manifest,
    load_weights,
    write_atomic,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SHAPE = 4

METHODS = ("lrp", "gradcam", "occlusion", "smoothgrad")


@dataclass
class ExplainParams:
    epsilon: float = DEFAULT_EPSILON
    patch: int = explainers.OCCLUSION_PATCH
    stride: int = explainers.OCCLUSION_STRIDE
    baseline: float = 0.0  # in normalized space: the dataset mean color
    samples: int = explainers.SMOOTHGRAD_SAMPLES
    sigma: float = None  # None: derived from the normalized pixel range
    seed: int = 0
    gradcam_layer: str = None
    clip_percentile: float = DEFAULT_CLIP_PERCENTILE
    overlay_alpha: float = 0.5

    def validate(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.patch < 1 or self.stride < 1:
            raise ConfigError("patch and stride must be >= 1")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.clip_percentile <= 100.0:
            raise ConfigError(
                f"clip_percentile must be in (0, 100], got {self.clip_percentile}"
            )
        if not 0.0 <= self.overlay_alpha <= 1.0:
            raise ConfigError(f"overlay_alpha must be in [0, 1], got {self.overlay_alpha}")


@dataclass
class RunConfig:
    """Resolved run configuration; all paths absolute, ranges validated."""

    weights_path: str = None
    class_manifest_path: str = None
    architecture: str = "vgg16"
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    explain: ExplainParams = field(default_factory=ExplainParams)
    output_dir: str = "."
    precision: str = "f32"

    @classmethod
    def load(cls, path, need_model=True):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))

        def resolve(p):
            return p if p is None or os.path.isabs(p) else os.path.join(base, p)

        norm = raw.get("normalization", {})
        spec = NormalizationSpec(
            mean=tuple(norm.get("mean", NormalizationSpec().mean)),
            std=tuple(norm.get("std", NormalizationSpec().std)),
        )
        cfg = cls(
            weights_path=resolve(raw.get("weights")),
            class_manifest_path=resolve(raw.get("class_manifest")),
            architecture=raw.get("architecture", "vgg16"),
            normalization=spec,
            explain=ExplainParams(**raw.get("explain", {})),
            output_dir=resolve(raw.get("output_dir", ".")),
            precision=raw.get("precision", "f32"),
        )
        if cfg.architecture != "vgg16":
            cfg.architecture = resolve(cfg.architecture)
        cfg.explain.validate()
        if cfg.precision not in ("f32", "f64"):
            raise ConfigError(f"precision must be f32 or f64, got {cfg.precision!r}")
        if need_model:
            if cfg.weights_path is None or cfg.class_manifest_path is None:
                raise ConfigError("config must name both weights and class_manifest")
            for p in (cfg.weights_path, cfg.class_manifest_path):
                if not os.path.exists(p):
                    raise FileNotFoundError(f"configured path does not exist: {p}")
            if cfg.architecture != "vgg16" and not os.path.exists(cfg.architecture):
                raise FileNotFoundError(
                    f"configured architecture file does not exist: {cfg.architecture}"
                )
        return cfg

    @property
    def dtype(self):
        return np.float64 if self.precision == "f64" else np.float32

    def sigma(self):
        if self.explain.sigma is not None:
            return self.explain.sigma
        low, high = self.normalization.bounds()
        spread = float(np.mean(np.asarray(high) - np.asarray(low)))
        return explainers.SMOOTHGRAD_SIGMA_FACTOR * spread


def load_model(cfg):
    """(net, weights) from a validated config."""
    manifest = load_class_manifest(cfg.class_manifest_path)
    if cfg.architecture == "vgg16":
        net = build_vgg16(len(manifest), manifest)
    else:
        with open(cfg.architecture, "r", encoding="utf-8") as fh:
            net = network_from_dict(json.load(fh), class_manifest=manifest)
    weights = load_weights(cfg.weights_path)
    weights.validate_against(net)
    if cfg.precision == "f64":
        weights = weights.astype(np.float64)
    return net, weights


def load_input(cfg, net, image_path):
    """Decode, resize to the declared input and normalize."""
    image = read_ppm(image_path)
    _, h, w = net.input_shape
    resized = resize_bilinear(image, h, w)
    x = to_input_tensor(resized, cfg.normalization, dtype=cfg.dtype)
    return resized, x


def _write_text(path, text):
    write_atomic(path, text.encode("utf-8"))


def _write_map_txt(path, values):
    h, w = values.shape
    lines = [f"{h} {w}"]
    for row in values:
        lines.append(" ".join(format(float(v), ".17g") for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _format_meta(pairs):
    return "".join(f"{k}: {v}\n" for k, v in pairs)


def _require_config(args):
    path = getattr(args, "config", None)
    if path is None:
        raise ArgumentError("--config is required for this command")
    return path


def cmd_classify(args):
    cfg = RunConfig.load(_require_config(args))
    _apply_overrides(cfg, args)
    if args.top_k < 1:
        raise ArgumentError(f"top_k must be >= 1, got {args.top_k}")
    net, weights = load_model(cfg)
    _, x = load_input(cfg, net, args.image)
    ranked = classify(net, weights, x, min(args.top_k, net.num_classes))
    if getattr(args, "json", False):
        payload = [
            {"rank": i + 1, "label": lab, "score": sc, "probability": pr}
            for i, (lab, sc, pr) in enumerate(ranked)
        ]
        print(json.dumps({"image": args.image, "top": payload}, indent=1))
    else:
        for i, (label, score, prob) in enumerate(ranked, start=1):
            print(f"{i:2d}. {label:<24s} score {score: .6f}  p {prob:.6f}")
    return EXIT_OK


def _target_class(net, weights, x, requested):
    if requested is not None:
        if not 0 <= requested < net.num_classes:
            raise ArgumentError(
                f"target class {requested} out of range 0..{net.num_classes - 1}"
            )
        return requested
    label, _, _ = classify(net, weights, x, 1)[0]
    return net.class_manifest.index(label)


def cmd_explain(args):
    cfg = RunConfig.load(_require_config(args))
    _apply_overrides(cfg, args)
    if args.method not in METHODS:
        raise ArgumentError(f"unknown method {args.method!r}; known: {METHODS}")
    net, weights = load_model(cfg)
    image, x = load_input(cfg, net, args.image)
    target = _target_class(net, weights, x, args.target_class)
    score = class_score(forward(net, weights, x).pre_softmax, target)
    p = cfg.explain

    meta = [
        ("method", args.method),
        ("image", os.path.basename(args.image)),
        ("target_class", target),
        ("target_label", net.class_manifest[target]),
        ("score", format(score, ".17g")),
        ("precision", cfg.precision),
        ("clip_percentile", p.clip_percentile),
    ]
    trace = None
    if args.method == "lrp":
        low, high = cfg.normalization.bounds()
        rules = RuleAssignment.paper_default(net, low, high, p.epsilon)
        trace = lrp(net, weights, x, target, rules)
        smap = pixel_relevance(trace)
        pixel_map = smap
        meta.append(("epsilon", p.epsilon))
    elif args.method == "gradcam":
        layer = p.gradcam_layer or explainers.default_gradcam_layer(net)
        smap = explainers.grad_cam(net, weights, x, target, layer)
        pixel_map = upsample_map(smap, x.shape[1], x.shape[2])
        meta.append(("layer", layer))
    elif args.method == "occlusion":
        smap = explainers.occlusion_map(
            net, weights, x, target, patch=p.patch, stride=p.stride,
            baseline=p.baseline,
        )
        pixel_map = explainers.occlusion_to_pixels(
            smap, p.patch, p.stride, x.shape[1], x.shape[2]
        )
        meta.extend([("patch", p.patch), ("stride", p.stride), ("baseline", p.baseline)])
    else:  # smoothgrad
        sigma = cfg.sigma()
        smap = explainers.smoothgrad(
            net, weights, x, target, samples=p.samples, sigma=sigma, seed=p.seed
        )
        pixel_map = smap
        meta.extend([("samples", p.samples), ("sigma", format(sigma, ".17g")),
                     ("seed", p.seed)])

    os.makedirs(cfg.output_dir, exist_ok=True)
    prefix = os.path.join(cfg.output_dir, args.method)
    heat = render_heatmap(pixel_map, p.clip_percentile)
    write_atomic(prefix + "_heatmap.ppm", encode_ppm(heat))
    blended = overlay(image, heat, p.overlay_alpha)
    write_atomic(prefix + "_overlay.ppm", encode_ppm(blended))
    _write_map_txt(prefix + "_map.txt", smap.values)
    _write_text(prefix + "_meta.txt", _format_meta(meta))

    if trace is not None:
        sums_lines = [f"{name}\t{format(s, '.17g')}" for name, s in trace.sums]
        _write_text(prefix + "_sums.txt", "\n".join(sums_lines) + "\n")
        if args.export_trace:
            export_relevance_trace(trace, prefix + "_layers", p.clip_percentile)
    print(f"wrote {args.method} artifacts to {cfg.output_dir}")
    return EXIT_OK


def cmd_evaluate(args):
    config_path = getattr(args, "config", None)
    if config_path:
        cfg = RunConfig.load(config_path, need_model=False)
    else:
        cfg = RunConfig()
    _apply_overrides(cfg, args)
    rep, matrix, auc = metrics.evaluate_csv(args.csv, args.threshold)
    report_text = metrics.format_report(rep)
    confusion_text = metrics.format_confusion(matrix)
    auc_text = "AUC: undefined (single class)\n" if auc is None else f"AUC: {auc:.4f}\n"
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_text(os.path.join(cfg.output_dir, "report.txt"), report_text)
    _write_text(os.path.join(cfg.output_dir, "confusion.txt"), confusion_text)
    payload = metrics.report_as_dict(rep, matrix, auc)
    payload["threshold"] = args.threshold
    _write_text(
        os.path.join(cfg.output_dir, "report.json"),
        json.dumps(payload, indent=1) + "\n",
    )
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=1))
    else:
        print(report_text, end="")
        print(confusion_text, end="")
        print(auc_text, end="")
    return EXIT_OK


def cmd_selftest(args):
    results = run_selftest(seed=args.seed, fault=args.fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else 1


def cmd_weights(args):
    rows, checksum_ok, manifest = inspect_weights(args.weights)
    total = 0
    print(f"{'layer':<16}{'kind':<10}{'kernel shape':<24}{'params':>14}")
    for name, kind, shape, count in rows:
        total += count
        print(f"{name:<16}{kind:<10}{str(shape):<24}{count:>14,d}")
    print(f"{'total':<50}{total:>14,d}")
    print(f"bytes (f32): {total * 4:,d}")
    print(f"provenance: {manifest.get('provenance', '')}")
    print(f"checksum: {'OK' if checksum_ok else 'MISMATCH'} ({manifest['checksum_crc32']})")
    if not checksum_ok:
        print(
            f"error: blob checksum does not match manifest value "
            f"{manifest['checksum_crc32']}",
            file=sys.stderr,
        )
        return EXIT_IO
    return EXIT_OK


def _apply_overrides(cfg, args):
    if getattr(args, "output_dir", None):
        cfg.output_dir = args.output_dir
    if getattr(args, "precision", None):
        cfg.precision = args.precision
    if getattr(args, "seed", None) is not None and hasattr(cfg.explain, "seed"):
        cfg.explain.seed = args.seed


def build_parser():
    # global flags live on a parent so they parse both before and after
    # the subcommand; SUPPRESS keeps subcommand parsing from clobbering
    # values given at the root
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="run configuration JSON")
    common.add_argument("--output-dir", default=argparse.SUPPRESS,
                        help="directory for produced artifacts")
    common.add_argument("--precision", choices=("f32", "f64"),
                        default=argparse.SUPPRESS, help="numeric precision override")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output where supported")

    parser = argparse.ArgumentParser(
        prog="netlens",
        description="Convolutional inference and pixel-attribution toolkit",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="rank class labels for an image",
                       parents=[common])
    c.add_argument("image", help="input image (binary PPM)")
    c.add_argument("--top-k", type=int, default=5, dest="top_k")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("explain", help="write attribution heatmaps for an image",
                       parents=[common])
    e.add_argument("image", help="input image (binary PPM)")
    e.add_argument("--method", required=True, choices=METHODS)
    e.add_argument("--target-class", type=int, default=None, dest="target_class",
                   help="class index to explain (default: argmax)")
    e.add_argument("--seed", type=int, default=None,
                   help="noise seed override (smoothgrad)")
    e.add_argument("--export-trace", action="store_true", dest="export_trace",
                   help="also write per-layer LRP relevance maps")
    e.set_defaults(func=cmd_explain)

    v = sub.add_parser("evaluate", help="score a label,score CSV", parents=[common])
    v.add_argument("csv", help="CSV with header label,score")
    v.add_argument("--threshold", type=float, default=0.5)
    v.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("selftest", help="run the built-in oracle suites",
                       parents=[common])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fault", choices=CHECK_NAMES, default=None,
                   help="perturb one check to demonstrate failure detection")
    s.set_defaults(func=cmd_selftest)

    w = sub.add_parser("weights", help="inspect a stored weight file",
                       parents=[common])
    w.add_argument("weights", help="weight manifest path")
    w.set_defaults(func=cmd_weights)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (ArgumentError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PpmError, CsvError, WeightFormatError, UndefinedMetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DimensionError, WeightStoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except NetlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
