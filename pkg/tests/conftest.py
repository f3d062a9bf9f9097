import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def f64_fc(layer):
    """Float64 shadow copy of an FC layer for gradient checking."""
    from neurop.nn import FcLayer

    return FcLayer(layer.weight.astype(np.float64), layer.bias.astype(np.float64))


def f64_conv(layer):
    from neurop.nn import ConvLayer

    return ConvLayer(
        layer.weight.astype(np.float64),
        layer.bias.astype(np.float64),
        layer.stride,
        layer.padding,
    )
