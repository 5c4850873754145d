"""Random-walk ultrasound confidence maps.

Pixels form an 8-connected graph. A walker starting at a pixel either reaches
the transducer row (confidence 1) or the last row (confidence 0); the
probability of the former is the confidence, found by solving the Dirichlet
problem L_uu x_u = -L_ub x_b on the graph Laplacian.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from app.services.confidence.image import ConfidenceMap, UsImage
from app.utils.constants import CONFIDENCE_ALPHA, CONFIDENCE_BETA, CONFIDENCE_DOWNSAMPLE, CONFIDENCE_GAMMA
from app.utils.errors import InvalidArgumentError, NumericalFailureError
from app.utils.logger import get_logger

logger = get_logger("confidence")

# Added to every edge weight so that the Laplacian stays non-singular.
EDGE_EPSILON = 1e-10
RESIDUAL_TOLERANCE = 1e-6


def _resample(values: NDArray[np.float64], shape: tuple[int, int]) -> NDArray[np.float64]:
    """Bilinear resampling with corner pixels mapped onto corner pixels."""
    if values.shape == shape:
        return values.copy()
    rows = np.linspace(0.0, values.shape[0] - 1, shape[0])
    cols = np.linspace(0.0, values.shape[1] - 1, shape[1])
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(values, grid, order=1, mode="nearest")


def _graph_edges(
    attenuated: NDArray[np.float64], beta: float, gamma: float
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Edges (2, E) and weights of the 8-connected grid."""
    n_rows, n_cols = attenuated.shape
    index = np.arange(n_rows * n_cols).reshape(n_rows, n_cols)

    # (row offset, column offset, penalty)
    neighbourhood = (
        (1, 0, 0.0),
        (0, 1, gamma),
        (1, 1, np.sqrt(2.0) * gamma),
        (1, -1, np.sqrt(2.0) * gamma),
    )
    edges = []
    weights = []
    for d_row, d_col, penalty in neighbourhood:
        col_start, col_stop = max(0, -d_col), n_cols - max(0, d_col)
        a = index[: n_rows - d_row, col_start:col_stop]
        b = index[d_row:, col_start + d_col : col_stop + d_col]
        ga = attenuated.ravel()[a.ravel()]
        gb = attenuated.ravel()[b.ravel()]
        edges.append(np.vstack([a.ravel(), b.ravel()]))
        weights.append(np.exp(-beta * (np.abs(ga - gb) + penalty)) + EDGE_EPSILON)
    return np.hstack(edges), np.concatenate(weights)


def _build_laplacian(edges: NDArray[np.int64], weights: NDArray[np.float64], size: int) -> sparse.csr_matrix:
    both = np.hstack((weights, weights))
    degree = np.bincount(edges.ravel(), weights=both, minlength=size)
    diagonal = np.arange(size)
    i_indices = np.concatenate([edges.ravel(), diagonal])
    j_indices = np.concatenate([edges[::-1].ravel(), diagonal])
    data = np.concatenate([-both, degree])
    return sparse.coo_matrix((data, (i_indices, j_indices)), shape=(size, size)).tocsr()


def solve_confidence(
    intensities: NDArray[np.float64],
    alpha: float = CONFIDENCE_ALPHA,
    beta: float = CONFIDENCE_BETA,
    gamma: float = CONFIDENCE_GAMMA,
) -> NDArray[np.float64]:
    """Confidence at the resolution of ``intensities`` (no resampling)."""
    n_rows, n_cols = intensities.shape
    depth = np.arange(n_rows) / max(n_rows - 1, 1)
    attenuated = intensities * np.exp(-alpha * depth)[:, None]

    values = np.zeros((n_rows, n_cols))
    values[0] = 1.0
    if n_rows == 2:
        return values

    edges, weights = _graph_edges(attenuated, beta, gamma)
    lap = _build_laplacian(edges, weights, n_rows * n_cols)

    indices = np.arange(n_rows * n_cols)
    top = indices[:n_cols]
    unknown = indices[n_cols : (n_rows - 1) * n_cols]
    rows = lap[unknown, :]
    lap_uu = rows[:, unknown].tocsc()
    rhs = -np.ravel(rows[:, top].sum(axis=1))

    solution = spsolve(lap_uu, rhs)
    residual = float(np.linalg.norm(lap_uu @ solution - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))
    if not np.all(np.isfinite(solution)) or residual > RESIDUAL_TOLERANCE:
        logger.error(f"Confidence solve failed: relative residual {residual:.3e}")
        raise NumericalFailureError("confidence-map solve did not converge", residual)

    values[1:-1] = solution.reshape(n_rows - 2, n_cols)
    return values


def confidence_map(
    image: UsImage,
    alpha: float = CONFIDENCE_ALPHA,
    beta: float = CONFIDENCE_BETA,
    gamma: float = CONFIDENCE_GAMMA,
    downsample: int = CONFIDENCE_DOWNSAMPLE,
) -> ConfidenceMap:
    """Confidence map of a B-mode image.

    Edge weights are exp(-beta * (|g_i - g_j| + penalty)) with the attenuated
    intensity g = I * exp(-alpha * depth), depth normalized to [0, 1]; the
    penalty is gamma on horizontal edges, sqrt(2) * gamma on diagonals and 0
    on vertical edges. With ``downsample`` > 1 the system is solved on a
    smoothed, reduced grid and interpolated back.
    """
    if alpha <= 0 or beta <= 0 or gamma <= 0:
        raise InvalidArgumentError("alpha, beta and gamma must be positive")
    if downsample < 1:
        raise InvalidArgumentError("downsample factor must be at least 1")

    intensities = image.intensities
    n_rows, n_cols = intensities.shape
    if n_rows < 2:
        raise InvalidArgumentError("a confidence map needs at least two image rows")

    if downsample == 1:
        values = solve_confidence(intensities, alpha, beta, gamma)
    else:
        shape = (
            max(int(np.ceil(n_rows / downsample)), min(n_rows, 3)),
            max(int(np.ceil(n_cols / downsample)), 1),
        )
        smoothed = ndimage.gaussian_filter(intensities, sigma=downsample / 2.0, mode="nearest")
        small = np.clip(_resample(smoothed, shape), 0.0, 1.0)
        values = _resample(solve_confidence(small, alpha, beta, gamma), (n_rows, n_cols))

    values = np.clip(values, 0.0, 1.0)
    values[0] = 1.0
    values[-1] = 0.0
    logger.debug(f"Confidence map {n_rows}x{n_cols} (downsample {downsample}): mean {values.mean():.3f}")
    return ConfidenceMap(values)
