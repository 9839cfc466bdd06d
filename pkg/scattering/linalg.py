"""
Complex dense linear algebra for the scattering models.

All matrices are torch tensors of dtype complex128 whose last two axes are the
matrix axes; any leading axes are treated as a batch. The discrete Fourier
transform convention is unnormalized forward, 1/(rows*cols) inverse.
"""

import logging
import math
from typing import Sequence, Tuple, Union

import torch

from .exceptions import CirculantStructureError, ShapeError, SingularMatrixError

logger = logging.getLogger(__name__)

REAL = torch.float64
COMPLEX = torch.complex128

SINGULAR_PIVOT_RATIO = 1e-12
CIRCULANT_TOLERANCE = 1e-8

GridShape = Union[int, Sequence[int]]


def as_complex(x) -> torch.Tensor:
    """Return ``x`` as a complex128 tensor."""
    if not isinstance(x, torch.Tensor):
        x = torch.as_tensor(x)
    return x.to(COMPLEX)


def _grid_shape(grid: GridShape) -> Tuple[int, int]:
    if isinstance(grid, int):
        return grid, grid
    rows, cols = (int(v) for v in grid)
    return rows, cols


def _require_matrix(m: torch.Tensor, name: str) -> None:
    if m.ndim < 2 or m.shape[-1] < 1 or m.shape[-2] < 1:
        raise ShapeError(f"{name} expects a tensor with two non-empty matrix axes, got shape {tuple(m.shape)}")


def relative_error(actual: torch.Tensor, expected: torch.Tensor) -> float:
    """Relative Frobenius distance ||actual - expected|| / ||expected|| (absolute when expected is zero)."""
    diff = torch.linalg.vector_norm(actual - expected).item()
    scale = torch.linalg.vector_norm(expected).item()
    return diff / scale if scale > 0 else diff


def dft2(m: torch.Tensor) -> torch.Tensor:
    """Unnormalized forward 2-D DFT over the last two axes."""
    _require_matrix(m, 'dft2')
    return torch.fft.fft2(as_complex(m), dim=(-2, -1))


def idft2(s: torch.Tensor, shape: GridShape = None) -> torch.Tensor:
    """
    Inverse 2-D DFT with 1/(rows*cols) normalization.

    A packed spectrum holding only retained modes may be passed together with
    the full ``shape``; it is zero-padded onto the standard DFT ordering first.
    """
    _require_matrix(s, 'idft2')
    if shape is not None:
        rows, cols = _grid_shape(shape)
        if s.shape[-2:] != (rows, cols):
            if s.shape[-2] > rows or s.shape[-1] > cols:
                raise ShapeError(f"spectrum of shape {tuple(s.shape[-2:])} does not fit grid {(rows, cols)}")
            s = embed_modes(s, (rows, cols))
    return torch.fft.ifft2(as_complex(s), dim=(-2, -1))


def mode_indices(n: int, modes: int) -> torch.Tensor:
    """
    Indices of the ``min(modes, n)`` lowest-frequency modes on one DFT axis:
    ``[0, ceil(m/2))`` followed by ``[n - floor(m/2), n)``.
    """
    if modes < 1:
        raise ShapeError(f"mode cutoff must be at least 1, got {modes}")
    m = min(modes, n)
    low = torch.arange(0, (m + 1) // 2)
    high = torch.arange(n - m // 2, n)
    return torch.cat([low, high])


def mode_mask(shape: GridShape, modes: int) -> torch.Tensor:
    """Boolean mask selecting the retained low-frequency modes of a spectrum."""
    rows, cols = _grid_shape(shape)
    mask = torch.zeros(rows, cols, dtype=torch.bool)
    mask[mode_indices(rows, modes)[:, None], mode_indices(cols, modes)[None, :]] = True
    return mask


def mode_truncate(s: torch.Tensor, modes: int) -> torch.Tensor:
    """Zero every mode outside the symmetric low-pass window; the full shape is kept."""
    _require_matrix(s, 'mode_truncate')
    mask = mode_mask(s.shape[-2:], modes)
    return torch.where(mask, as_complex(s), torch.zeros((), dtype=COMPLEX))


def embed_modes(packed: torch.Tensor, shape: GridShape) -> torch.Tensor:
    """
    Place a packed (..., m_f, m_i) block of retained modes into a zero spectrum of
    the full ``shape``. Packed position ``a`` maps to ``mode_indices(n, m)[a]``.
    """
    rows, cols = _grid_shape(shape)
    m_f, m_i = packed.shape[-2:]
    if m_f > rows or m_i > cols:
        raise ShapeError(f"packed spectrum {(m_f, m_i)} exceeds grid {(rows, cols)}")
    full = torch.zeros(*packed.shape[:-2], rows, cols, dtype=COMPLEX)
    full[..., mode_indices(rows, m_f)[:, None], mode_indices(cols, m_i)[None, :]] = as_complex(packed)
    return full


def half_columns(n: int) -> int:
    """Columns of the real-FFT half-plane of an n-column spectrum."""
    return n // 2 + 1


def embed_half_modes(packed: torch.Tensor, shape: GridShape) -> torch.Tensor:
    """
    Place a packed (..., m_f, m_i) block into a zero half-plane spectrum of shape
    (..., rows, cols // 2 + 1). Rows follow ``mode_indices``; packed column ``b``
    is column ``b`` of the half-plane.
    """
    rows, cols = _grid_shape(shape)
    h = half_columns(cols)
    m_f, m_i = packed.shape[-2:]
    if m_f > rows or m_i > h:
        raise ShapeError(f"packed half-plane spectrum {(m_f, m_i)} exceeds {(rows, h)}")
    half = torch.zeros(*packed.shape[:-2], rows, h, dtype=COMPLEX)
    half[..., mode_indices(rows, m_f)[:, None], torch.arange(m_i)[None, :]] = as_complex(packed)
    return half


def hermitian_extend(half: torch.Tensor, cols: int) -> torch.Tensor:
    """
    Full (..., rows, cols) spectrum from its half-plane: column j >= cols // 2 + 1
    holds conj(half[(-k) mod rows, cols - j]). Columns inside the half-plane are
    taken as given.
    """
    rows, h = half.shape[-2:]
    if h != half_columns(cols):
        raise ShapeError(f"half-plane of {h} columns does not belong to a {cols}-column spectrum")
    tail_cols = torch.arange(h, cols)
    if tail_cols.numel() == 0:
        return half
    mirror_rows = (-torch.arange(rows)) % rows
    tail = torch.conj_physical(half[..., mirror_rows[:, None], (cols - tail_cols)[None, :]])
    return torch.cat([half, tail], dim=-1)


def mat_inverse(m: torch.Tensor) -> torch.Tensor:
    """
    Invert a square complex matrix by LU decomposition with partial pivoting.

    Raises SingularMatrixError when a pivot is smaller than 1e-12 times the
    largest entry magnitude.
    """
    _require_matrix(m, 'mat_inverse')
    if m.shape[-1] != m.shape[-2]:
        raise ShapeError(f"mat_inverse expects a square matrix, got {tuple(m.shape[-2:])}")
    m = as_complex(m)
    scale = m.abs().amax().item()
    if scale == 0.0 or not math.isfinite(scale):
        raise SingularMatrixError(f"cannot invert matrix with max entry {scale}", pivot=0.0)
    lu, pivots, _ = torch.linalg.lu_factor_ex(m)
    smallest = lu.diagonal(dim1=-2, dim2=-1).abs().amin().item()
    if smallest < SINGULAR_PIVOT_RATIO * scale:
        logger.warning(f"Singular matrix: pivot {smallest:.3e} against max entry {scale:.3e}")
        raise SingularMatrixError(
            f"matrix is singular to working precision (pivot {smallest:.3e}, max entry {scale:.3e})",
            pivot=smallest,
        )
    eye = torch.eye(m.shape[-1], dtype=COMPLEX).expand_as(m).contiguous()
    return torch.linalg.lu_solve(lu, pivots, eye)


def circulant_embed(kernel: torch.Tensor, grid: GridShape) -> torch.Tensor:
    """
    Doubly-block circulant matrix D of shape (rows*cols, rows*cols) such that
    D @ X.flatten() equals the circular 2-D convolution of ``kernel`` with X.

    The kernel is anchored at the origin and zero-padded up to the grid.
    """
    rows, cols = _grid_shape(grid)
    if kernel.ndim != 2:
        raise ShapeError(f"circulant_embed expects a 2-D kernel, got shape {tuple(kernel.shape)}")
    k_rows, k_cols = kernel.shape
    if k_rows > rows or k_cols > cols:
        raise ShapeError(f"kernel {(k_rows, k_cols)} is larger than grid {(rows, cols)}")
    padded = torch.zeros(rows, cols, dtype=COMPLEX)
    padded[:k_rows, :k_cols] = as_complex(kernel)
    r = torch.arange(rows)
    c = torch.arange(cols)
    row_offsets = (r[:, None] - r[None, :]) % rows
    col_offsets = (c[:, None] - c[None, :]) % cols
    blocks = padded[row_offsets[:, None, :, None], col_offsets[None, :, None, :]]
    return blocks.reshape(rows * cols, rows * cols)


def circulant_extract(
    d: torch.Tensor,
    kernel_shape: Sequence[int],
    grid: GridShape = None,
    tolerance: float = CIRCULANT_TOLERANCE,
) -> torch.Tensor:
    """
    Recover the generating kernel of a doubly-block circulant matrix.

    The kernel is read from the first block-column; the matrix rebuilt from it
    must match ``d`` to ``tolerance`` (relative Frobenius), otherwise a
    CirculantStructureError reports the measured deviation.
    """
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ShapeError(f"circulant_extract expects a square matrix, got shape {tuple(d.shape)}")
    size = d.shape[0]
    if grid is None:
        n = math.isqrt(size)
        if n * n != size:
            raise ShapeError(f"matrix of size {size} is not an (n^2 x n^2) operator")
        grid = (n, n)
    rows, cols = _grid_shape(grid)
    if rows * cols != size:
        raise ShapeError(f"grid {(rows, cols)} does not match operator size {size}")
    k_rows, k_cols = (int(v) for v in kernel_shape)
    if k_rows > rows or k_cols > cols:
        raise ShapeError(f"kernel shape {(k_rows, k_cols)} is larger than grid {(rows, cols)}")

    d = as_complex(d)
    kernel = d[:, 0].reshape(rows, cols)[:k_rows, :k_cols].clone()
    deviation = relative_error(circulant_embed(kernel, (rows, cols)), d)
    if deviation > tolerance:
        logger.warning(f"Operator deviates from circulant form of a {(k_rows, k_cols)} kernel by {deviation:.3e}")
        raise CirculantStructureError(
            f"operator is not the doubly-block circulant form of a {k_rows}x{k_cols} kernel "
            f"(relative deviation {deviation:.3e} > {tolerance:.1e})",
            deviation=deviation,
        )
    return kernel
