"""
Compiled im2col / col2im kernels used by conv2d.
"""
import numba


@numba.jit(nopython=True, cache=True)
def im2col(x, kh, kw, stride, out):
    """
    Unfolds receptive fields of a padded image batch into columns.

    Parameters
    ----------
    x : ndarray
        (N x C x H x W) padded input.
    kh, kw : int
        Kernel height and width.
    stride : int
        Step between receptive fields.
    out : ndarray
        (N x C*kh*kw x Ho*Wo) array, overwritten with the columns.
    """
    N, C, H, W = x.shape
    Ho = (H - kh) // stride + 1
    Wo = (W - kw) // stride + 1

    for n in range(N):
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = (c * kh + i) * kw + j
                    for p in range(Ho):
                        for q in range(Wo):
                            out[n, row, p * Wo + q] = \
                                x[n, c, p * stride + i, q * stride + j]
    return out


@numba.jit(nopython=True, cache=True)
def col2im(cols, kh, kw, stride, Ho, Wo, out):
    """
    Adjoint of im2col: scatters columns back onto the padded grid,
    summing overlapping contributions into ``out``.
    """
    N, C, H, W = out.shape

    for n in range(N):
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    row = (c * kh + i) * kw + j
                    for p in range(Ho):
                        for q in range(Wo):
                            out[n, c, p * stride + i, q * stride + j] += \
                                cols[n, row, p * Wo + q]
    return out
