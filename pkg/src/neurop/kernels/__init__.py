"""Hot pixel kernels, twice: numba-jitted and pure numpy.

Both backends implement the same contracts:

* per-pixel arithmetic is independent of batch size, so applying a kernel
  to one pixel or a million gives bit-identical values per pixel;
* a fixed summation order per output element, so repeated calls are
  bit-reproducible.

`neurop.backend` decides which twin is exported here (env flag
``NEUROP_BACKEND``). The numpy twin achieves batch independence by always
running BLAS on fixed-size padded tiles; the numba twin processes pixels
in fixed lanes with a lane-local instruction sequence.
"""

from neurop.backend import use_numba

if use_numba():
    from neurop.kernels import numba_impl as _impl
else:
    from neurop.kernels import numpy_impl as _impl

neurop_apply = _impl.neurop_apply
conv2d_forward = _impl.conv2d_forward
resize_bilinear = _impl.resize_bilinear
resize_bilinear_backward = _impl.resize_bilinear_backward

__all__ = [
    "neurop_apply",
    "conv2d_forward",
    "resize_bilinear",
    "resize_bilinear_backward",
]
