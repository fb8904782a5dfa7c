"""Writes tests/fixtures/tiny_extractor.onnx and its expected output.

The network takes 1x3x8x8 floats, averages each channel and maps the three
means through a fixed 4x3 affine layer, giving a 4-vector.
"""

import json
import pathlib

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

WEIGHTS = np.array(
    [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.5, -0.5, 1.0], [-1.0, 1.0, 3.0]], dtype=np.float32
)
BIAS = np.array([0.0, 0.25, -0.5, 1.0], dtype=np.float32)


def build_model():
    x = helper.make_tensor_value_info("image", TensorProto.FLOAT, [1, 3, 8, 8])
    y = helper.make_tensor_value_info("features", TensorProto.FLOAT, [1, 4])
    nodes = [
        helper.make_node("GlobalAveragePool", ["image"], ["pooled"]),
        helper.make_node("Flatten", ["pooled"], ["means"], axis=1),
        helper.make_node("Gemm", ["means", "W", "B"], ["features"], transB=1),
    ]
    graph = helper.make_graph(
        nodes,
        "tiny_extractor",
        [x],
        [y],
        initializer=[numpy_helper.from_array(WEIGHTS, "W"), numpy_helper.from_array(BIAS, "B")],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 11)])
    model.ir_version = 6
    onnx.checker.check_model(model)
    return model


def probe_image():
    # Same pattern the C++ test draws: (30x, 30y, 15(x+y)) on an 8x8 grid.
    img = np.zeros((8, 8, 3), dtype=np.float64)
    for y in range(8):
        for x in range(8):
            img[y, x] = (30 * x, 30 * y, 15 * (x + y))
    return img / 255.0


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    onnx.save(build_model(), FIXTURES / "tiny_extractor.onnx")
    means = probe_image().reshape(-1, 3).mean(axis=0)
    expected = WEIGHTS.astype(np.float64) @ means + BIAS.astype(np.float64)
    (FIXTURES / "tiny_extractor_expected.json").write_text(
        json.dumps({"input_width": 8, "input_height": 8, "features": expected.tolist()}, indent=2) + "\n"
    )


if __name__ == "__main__":
    main()
