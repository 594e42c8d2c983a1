#!/usr/bin/env python3
"""Convert a Keras application backbone (include_top=False) into a treebark
weight file that `build_model` loads when `model.pretrained` is true.

    python3 tools/export_keras_weights.py resnet101_v2 --out ~/.cache/treebark/weights

Kernels are transposed from Keras' HWIO layout to OIHW; depthwise kernels
become grouped convolutions. Tensor names are `<keras layer>.<weight>`.

`--weights none` exports a randomly initialised model, which together with
`--dump-features` gives an offline parity check against the C++ backbone.
"""

import argparse
import hashlib
import json
import os
import struct
import sys

import numpy as np

MAGIC = b"TBWEIGHT"

APPLICATIONS = {
    "resnet101_v2": "ResNet101V2",
    "resnet101": "ResNet101",
    "resnet50": "ResNet50",
    "vgg19": "VGG19",
    "inception_v3": "InceptionV3",
    "mobilenet": "MobileNet",
}


def leaf_name(weight):
    path = getattr(weight, "path", None) or weight.name
    return path.split("/")[-1].split(":")[0]


def convert_layer(layer):
    """Yields (name, float32 array) pairs in the native layout."""
    kind = type(layer).__name__
    for weight in layer.weights:
        leaf = leaf_name(weight)
        value = np.asarray(weight.numpy(), dtype=np.float32)
        if kind == "DepthwiseConv2D" and leaf in ("depthwise_kernel", "kernel"):
            kh, kw, cin, mult = value.shape
            value = value.transpose(2, 3, 0, 1).reshape(cin * mult, 1, kh, kw)
            leaf = "kernel"
        elif kind == "Conv2D" and leaf == "kernel":
            value = value.transpose(3, 2, 0, 1)
        elif kind not in ("Conv2D", "DepthwiseConv2D", "BatchNormalization"):
            raise ValueError(f"unexpected weighted layer {layer.name} ({kind})")
        yield f"{layer.name}.{leaf}", np.ascontiguousarray(value)


def write_tensor_file(path, meta, tensors):
    index = []
    offset = 0
    digest = hashlib.sha256()
    payload = []
    for name, value in tensors:
        data = value.astype("<f4").tobytes()
        index.append({"name": name, "shape": list(value.shape), "offset": offset})
        offset += len(data)
        digest.update(data)
        payload.append(data)
    header = json.dumps(
        {
            "format_version": 1,
            "meta": meta,
            "tensors": index,
            "payload_bytes": offset,
            "payload_sha256": digest.hexdigest(),
        },
        separators=(",", ":"),
    ).encode()
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<Q", len(header)))
        out.write(header)
        for data in payload:
            out.write(data)


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("backbone", choices=sorted(APPLICATIONS))
    parser.add_argument("--out", default=os.path.expanduser("~/.cache/treebark/weights"), help="output directory")
    parser.add_argument("--size", type=int, default=160, help="input height and width")
    parser.add_argument("--weights", default="imagenet", help="'imagenet', 'none' or a Keras weight file")
    parser.add_argument("--seed", type=int, default=0, help="initialisation seed for --weights none")
    parser.add_argument("--dump-features", metavar="PREFIX",
                        help="also write PREFIX.input and PREFIX.features (float32 NHWC) for one random batch")
    args = parser.parse_args()

    import keras

    keras.utils.set_random_seed(args.seed)
    factory = getattr(keras.applications, APPLICATIONS[args.backbone])
    weights = None if args.weights == "none" else args.weights
    model = factory(include_top=False, weights=weights, input_shape=(args.size, args.size, 3))

    tensors = []
    for layer in model.layers:
        if layer.weights:
            tensors.extend(convert_layer(layer))

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.backbone}_imagenet_notop.tbw")
    meta = {"kind": "backbone", "backbone": args.backbone, "source": f"keras.applications.{APPLICATIONS[args.backbone]}",
            "weights": args.weights, "input_size": args.size}
    write_tensor_file(path, meta, tensors)
    print(f"wrote {len(tensors)} tensors to {path}")

    if args.dump_features:
        rng = np.random.default_rng(args.seed)
        inputs = rng.uniform(-1.0, 1.0, size=(2, args.size, args.size, 3)).astype(np.float32)
        features = np.asarray(model(inputs, training=False), dtype=np.float32)
        inputs.tofile(args.dump_features + ".input")
        features.tofile(args.dump_features + ".features")
        print(f"features {features.shape} written to {args.dump_features}.features")
    return 0


if __name__ == "__main__":
    sys.exit(main())
