import numpy as np
import pytest

from bumpmark.errors import InvalidArgument, ShapeError
from bumpmark.nn.model import LAYER_SPECS, ConfidenceNet, load_weights, save_weights
from bumpmark.nn.ops import mse_loss


def test_layer_architecture():
    # 5 convs: kernels 9,7,7,7,1; channels 3->48->96->48->24->1
    kernels = [k for (_, _, k, _) in LAYER_SPECS]
    chans = [LAYER_SPECS[0][0]] + [c_out for (_, c_out, _, _) in LAYER_SPECS]
    assert kernels == [9, 7, 7, 7, 1]
    assert chans == [3, 48, 96, 48, 24, 1]
    assert [pool for (_, _, _, pool) in LAYER_SPECS] == [True, True, False, False, False]


def test_output_is_quarter_resolution():
    net = ConfidenceNet(seed=0, width_scale=0.125)
    y = net.forward(np.zeros((2, 3, 16, 24), dtype=np.float32))
    assert y.shape == (2, 1, 4, 6)


def test_input_dims_must_be_divisible_by_four():
    net = ConfidenceNet(seed=0, width_scale=0.125)
    with pytest.raises((InvalidArgument, ShapeError)):
        net.forward(np.zeros((1, 3, 18, 16), dtype=np.float32))


def test_zero_weights_zero_output():
    net = ConfidenceNet(seed=1, width_scale=0.125)
    net.set_params([np.zeros_like(p) for p in net.params()])
    y = net.forward(np.ones((1, 3, 8, 8), dtype=np.float32))
    assert not y.any()


def test_init_deterministic_per_seed():
    a = ConfidenceNet(seed=5, width_scale=0.25)
    b = ConfidenceNet(seed=5, width_scale=0.25)
    for pa, pb in zip(a.params(), b.params()):
        assert np.array_equal(pa, pb)


@pytest.mark.parametrize("seed", range(3))
def test_end_to_end_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = ConfidenceNet(seed=seed, width_scale=1 / 12, dtype=np.float64)
    x = rng.normal(size=(1, 3, 8, 8))
    target = rng.uniform(size=(1, 1, 2, 2))

    def loss():
        return mse_loss(net.forward(x), target)[0]

    def pattern():
        # relu signs and pool argmaxes: the piecewise-linear region id.
        # FD is only valid where the perturbation stays in one region.
        net.forward(x, keep_cache=True)
        pats = []
        for _, pre_act, pool_arg, _ in net._cache:
            pats.append(pre_act > 0)
            if pool_arg is not None:
                pats.append(pool_arg.copy())
        net._cache = None
        return pats

    def same_pattern(a, b):
        return all(np.array_equal(pa, pb) for pa, pb in zip(a, b))

    y = net.forward(x, keep_cache=True)
    _, dout = mse_loss(y, target)
    grads = net.backward(dout)
    base = pattern()

    params = net.params()
    h = 1e-3
    worst = 0.0
    checked = 0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        idx = rng.choice(flat.size, size=min(6, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp, patp = loss(), pattern()
            flat[i] = orig - h
            fm, patm = loss(), pattern()
            flat[i] = orig
            if not (same_pattern(base, patp) and same_pattern(base, patm)):
                continue  # crossed a relu/pool boundary; FD undefined here
            fd = (fp - fm) / (2 * h)
            scale = max(abs(fd), abs(g.reshape(-1)[i]), 1e-6)
            worst = max(worst, abs(fd - g.reshape(-1)[i]) / scale)
            checked += 1
    assert checked >= 20
    assert worst <= 1e-2


def test_infer_shape_and_range(small_scene):
    net = ConfidenceNet(seed=3, width_scale=0.125)
    conf = net.infer(small_scene["img"])
    h, w = small_scene["img"].shape[:2]
    assert conf.shape == (h // 4, w // 4)
    assert conf.min() >= 0.0 and conf.max() <= 1.0


def test_weights_file_round_trip(tmp_path):
    net = ConfidenceNet(seed=7, width_scale=0.25)
    path = tmp_path / "w.bin"
    save_weights(path, net)
    back = load_weights(path)
    for pa, pb in zip(net.params(), back.params()):
        assert np.array_equal(pa, pb)


def test_weights_file_bad_magic_rejected(tmp_path):
    from bumpmark.errors import DataError

    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(DataError):
        load_weights(path)


def test_save_weights_deterministic_bytes(tmp_path):
    net = ConfidenceNet(seed=2, width_scale=0.25)
    save_weights(tmp_path / "a.bin", net)
    save_weights(tmp_path / "b.bin", net)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
