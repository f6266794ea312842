import numpy as np
import pytest

from specgconv.filters import Tabulated
from specgconv.graphs import LaplacianKind, build_laplacian, random_graph
from specgconv.kernels import design_kernel
from specgconv.nn import (
    Dense,
    DepthwiseSeparableConv,
    ModelSpec,
    MultiSupportConv,
    ReadoutMeanMax,
    binary_cross_entropy_tansig,
    count_parameters,
    forward_depthwise,
    forward_multisupport,
    init_parameters,
    micro_f1,
    model_forward,
    param_count,
    parse_architecture,
    softmax_cross_entropy,
)
from specgconv.spectral import decompose


def test_identity_conv_passes_through():
    H = np.random.default_rng(0).standard_normal((6, 3))
    out = forward_multisupport(H, [np.eye(6)], [np.eye(3)])
    assert np.array_equal(out, H)


def test_fig1_style_layer_has_12_weights():
    spec = ModelSpec((MultiSupportConv(out=3, use_bias=False, activation="relu"),))
    params = init_parameters(spec, f0=2, n_supports=2, rng=np.random.default_rng(0))
    assert count_parameters(params) == 12


def test_multisupport_matches_spectral_side():
    rng = np.random.default_rng(1)
    g = random_graph(9, 0.4, seed=0)
    kind = LaplacianKind.SYM_NORMALIZED
    basis = decompose(build_laplacian(g, kind), kind)
    B = rng.standard_normal((9, 3))
    supports = [design_kernel(basis, Tabulated(values=B[:, s])) for s in range(3)]
    weights = [rng.standard_normal((4, 2)) for _ in range(3)]
    H = rng.standard_normal((9, 4))
    U = basis.eigenvectors
    spectral = np.zeros((9, 2))
    for j in range(2):
        for i in range(4):
            w = np.array([W[i, j] for W in weights])
            spectral[:, j] += U @ np.diag(B @ w) @ U.T @ H[:, i]
    out = forward_multisupport(H, supports, weights)
    assert np.max(np.abs(out - spectral)) < 1e-10


def test_depthwise_fresh_init_collapses_to_first_support():
    rng = np.random.default_rng(2)
    H = rng.standard_normal((8, 5))
    supports = [rng.standard_normal((8, 8)) for _ in range(3)]
    W = rng.standard_normal((5, 4))
    dw = np.zeros((3, 5))
    dw[0] = 1.0
    dsg = forward_depthwise(H, supports, dw, W)
    single = forward_multisupport(H, supports[:1], [W])
    assert np.max(np.abs(dsg - single)) < 1e-14


def test_depthwise_single_support_unit_weights():
    rng = np.random.default_rng(3)
    H = rng.standard_normal((6, 3))
    C = rng.standard_normal((6, 6))
    W = rng.standard_normal((3, 2))
    dsg = forward_depthwise(H, [C], np.ones((1, 3)), W)
    conv = forward_multisupport(H, [C], [W])
    assert np.array_equal(dsg, conv)


def test_depthwise_matches_naive_loop():
    rng = np.random.default_rng(4)
    n, f_in, f_out, S = 7, 4, 3, 3
    H = rng.standard_normal((n, f_in))
    supports = [rng.standard_normal((n, n)) for _ in range(S)]
    dw = rng.standard_normal((S, f_in))
    W = rng.standard_normal((f_in, f_out))
    bias = rng.standard_normal(f_out)

    mixed = np.zeros((n, f_in))
    for s in range(S):
        filtered = supports[s] @ H
        for col in range(f_in):
            mixed[:, col] += dw[s, col] * filtered[:, col]
    want = np.tanh(mixed @ W + bias)
    got = forward_depthwise(H, supports, dw, W, bias=bias, activation="tanh")
    assert np.max(np.abs(got - want)) < 1e-12


def test_param_count_cora_table_model():
    spec = parse_architecture("DSG160-DSG7")
    assert param_count(spec, f0=1433, n_supports=4, separable=True) == 236772
    assert param_count(spec, f0=1433, n_supports=4, separable=False) == 921600


def test_param_count_single_support_difference():
    spec = ModelSpec((
        MultiSupportConv(out=6, activation="relu"),
        MultiSupportConv(out=4, activation="relu"),
        MultiSupportConv(out=2, activation="linear"),
    ))
    f0 = 5
    widths_sum = f0 + 6 + 4  # conv input widths
    multi = param_count(spec, f0, n_supports=1, separable=False)
    sep = param_count(spec, f0, n_supports=1, separable=True)
    assert sep - multi == widths_sum


def test_param_count_matches_enumerated_storage():
    rng = np.random.default_rng(5)
    for _ in range(50):
        depth = int(rng.integers(1, 4))
        S = int(rng.integers(1, 5))
        f0 = int(rng.integers(1, 9))
        kind = rng.choice(["G", "DSG", "D"])
        cls = {"G": MultiSupportConv, "DSG": DepthwiseSeparableConv, "D": Dense}[kind]
        layers = []
        for d in range(depth):
            layers.append(cls(out=int(rng.integers(1, 9)), use_bias=bool(rng.integers(2)),
                              activation="relu"))
        spec = ModelSpec(tuple(layers))
        params = init_parameters(spec, f0, S, np.random.default_rng(0))
        assert param_count(spec, f0, S) == count_parameters(params, include_bias=False)


def test_param_count_with_readout_pipeline():
    spec = parse_architecture("G200-G200-meanmax-D100-D2")
    f0, S = 3, 2
    params = init_parameters(spec, f0, S, np.random.default_rng(0))
    assert param_count(spec, f0, S) == count_parameters(params)
    assert spec.widths(f0) == [3, 200, 200, 400, 100, 2]


def test_readout_concatenates_mean_and_max():
    spec = ModelSpec((ReadoutMeanMax(),))
    params = init_parameters(spec, 3, 1, np.random.default_rng(0))
    H = np.array([[1.0, -2.0, 0.0], [3.0, 4.0, -1.0]])
    out, _ = model_forward(spec, params, H, [])
    assert out.shape == (1, 6)
    assert np.array_equal(out[0, :3], H.mean(axis=0))
    assert np.array_equal(out[0, 3:], H.max(axis=0))


def test_softmax_cross_entropy_values():
    # near-one-hot prediction: loss approaches zero from above
    logits = np.array([[30.0, 0.0, 0.0]])
    loss, _ = softmax_cross_entropy(logits, np.array([0]))
    assert 0 < loss < 1e-12
    # uniform prediction over 7 classes
    loss7, _ = softmax_cross_entropy(np.zeros((4, 7)), np.zeros(4, dtype=int))
    assert loss7 == pytest.approx(np.log(7.0), abs=1e-12)


def test_softmax_cross_entropy_empty_mask():
    with pytest.raises(ValueError, match="mask"):
        softmax_cross_entropy(np.zeros((3, 2)), np.zeros(3, dtype=int), np.zeros(3, bool))


def test_binary_cross_entropy_values():
    # outputs 0 mean p = 1/2 for every criterion
    loss, grad = binary_cross_entropy_tansig(np.zeros((2, 3)), np.ones((2, 3)))
    assert loss == pytest.approx(np.log(2.0), abs=1e-12)
    assert grad.shape == (2, 3)
    # strongly correct outputs drive the loss to zero
    z = 20.0 * (np.array([[1.0, 0.0], [0.0, 1.0]]) * 2 - 1)
    y = (z > 0).astype(float)
    loss2, _ = binary_cross_entropy_tansig(z, y)
    assert loss2 < 1e-12


def test_micro_f1():
    out = np.array([[1.0, -1.0], [1.0, 1.0]])
    y = np.array([[1.0, 0.0], [0.0, 1.0]])
    # tp=2, fp=1, fn=0
    assert micro_f1(out, y) == pytest.approx(4 / 5)
    assert micro_f1(-np.ones((2, 2)), np.zeros((2, 2))) == 1.0


def test_parse_architecture_tokens():
    spec = parse_architecture("DSG160-DSG7")
    assert [type(l).__name__ for l in spec.layers] == ["DepthwiseSeparableConv"] * 2
    assert spec.layers[0].activation == "relu" and spec.layers[1].activation == "linear"
    assert spec.layers[0].use_bias is False and spec.layers[1].use_bias is True

    spec2 = parse_architecture("G200-G200-meanmax-D100-D2")
    kinds = [type(l).__name__ for l in spec2.layers]
    assert kinds == ["MultiSupportConv", "MultiSupportConv", "ReadoutMeanMax", "Dense", "Dense"]
    assert spec2.layers[-1].activation == "linear"

    spec3 = parse_architecture("DSG16-DSG3", output_activation="relu")
    assert spec3.layers[-1].activation == "relu"


def test_parse_architecture_errors():
    with pytest.raises(ValueError):
        parse_architecture("")
    with pytest.raises(ValueError):
        parse_architecture("Q16")
    with pytest.raises(ValueError):
        parse_architecture("meanmax")
    with pytest.raises(ValueError):
        parse_architecture("G0")


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec((MultiSupportConv(out=3, activation="softmax"),))
    with pytest.raises(ValueError):
        ModelSpec(())
