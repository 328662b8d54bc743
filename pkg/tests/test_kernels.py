import numpy as np
import pytest

from mvmilstein import _kernels
from mvmilstein.taming import KIND_CODES


def _random_inputs(rng, N, d, m, with_cross):
    states = np.ascontiguousarray(rng.normal(size=(N, d)))
    F = np.ascontiguousarray(rng.normal(scale=5.0, size=(N, d)))
    G = np.ascontiguousarray(rng.normal(scale=2.0, size=(N, m, d)))
    LY = np.ascontiguousarray(rng.normal(scale=3.0, size=(N, m, m, d)))
    LR = np.ascontiguousarray(rng.normal(size=(N, N, m, m, d)))
    dW = np.ascontiguousarray(rng.normal(scale=0.1, size=(N, m)))
    own = np.ascontiguousarray(rng.normal(scale=0.01, size=(N, m, m)))
    cross = (np.ascontiguousarray(rng.normal(scale=0.01,
                                             size=(N * m, N * m)))
             if with_cross else None)
    return states, F, G, LY, LR, dW, own, cross


@pytest.mark.skipif(_kernels.compiled_step is None,
                    reason="compiled kernel not built")
@pytest.mark.parametrize("kinds", [
    (0, 0, 0, 0), (1, 1, 1, 1), (2, 2, 2, 2), (3, 3, 3, 3), (1, 2, 3, 1)])
@pytest.mark.parametrize("shape", [(7, 1, 1), (5, 2, 1), (6, 3, 3)])
@pytest.mark.parametrize("with_cross", [False, True])
def test_compiled_matches_fallback(kinds, shape, with_cross):
    N, d, m = shape
    rng = np.random.default_rng(hash((kinds, shape, with_cross)) % 2 ** 32)
    states, F, G, LY, LR, dW, own, cross = _random_inputs(
        rng, N, d, m, with_cross)
    h = 2.0 ** -6
    a = _kernels.fallback_step(states, F, G, LY, LR, dW, own, cross, h,
                               kinds, True, with_cross)
    b = _kernels.compiled_step(states, F, G, LY, LR, dW, own, cross, h,
                               kinds, True, with_cross)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


@pytest.mark.skipif(_kernels.compiled_step is None,
                    reason="compiled kernel not built")
def test_compiled_matches_fallback_euler_path():
    rng = np.random.default_rng(17)
    states, F, G, LY, LR, dW, own, cross = _random_inputs(rng, 8, 2, 2, False)
    h = 0.01
    for kind in KIND_CODES.values():
        kinds = (kind,) * 4
        a = _kernels.fallback_step(states, F, G, None, None, dW, own, None,
                                   h, kinds, False, False)
        b = _kernels.compiled_step(states, F, G, None, None, dW, own, None,
                                   h, kinds, False, False)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_selected_kernel_reported():
    assert _kernels.KERNEL in ("compiled", "numpy")
    if _kernels.compiled_step is not None:
        assert _kernels.KERNEL == "compiled"
