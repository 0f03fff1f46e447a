import logging
from pathlib import Path

import numpy as np

from core.errors import EvaluationError, InvalidArgumentError
from core.grid import QuadratureGrid
from kernels.base_kernel import BaseKernel

logger = logging.getLogger(__name__)

# Header: three little-endian int64 dimensions; body: little-endian float64 (Re, Im) pairs, row-major (x, s, y)
HEADER_DTYPE = np.dtype("<i8")
VALUE_DTYPE = np.dtype("<f8")


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    header_size = 3 * HEADER_DTYPE.itemsize
    if len(raw) < header_size:
        raise InvalidArgumentError(f"Tensor file {path} is shorter than its header")
    shape = tuple(int(d) for d in np.frombuffer(raw[:header_size], dtype=HEADER_DTYPE))
    if any(d <= 0 for d in shape):
        raise InvalidArgumentError(f"Tensor file {path} has invalid dimensions {shape}")
    body = np.frombuffer(raw[header_size:], dtype=VALUE_DTYPE)
    expected = 2 * shape[0] * shape[1] * shape[2]
    if body.size != expected:
        raise InvalidArgumentError(f"Tensor file {path} holds {body.size} floats, header {shape} needs {expected}")
    pairs = body.reshape(shape + (2,))
    return pairs[..., 0] + 1j * pairs[..., 1]


def write_tensor(path, values: np.ndarray):
    values = np.asarray(values, dtype=complex)
    if values.ndim != 3:
        raise InvalidArgumentError(f"Expected a 3-axis tensor, got shape {values.shape}")
    pairs = np.stack([values.real, values.imag], axis=-1).astype(VALUE_DTYPE)
    with open(path, "wb") as f:
        f.write(np.asarray(values.shape, dtype=HEADER_DTYPE).tobytes())
        f.write(pairs.tobytes(order="C"))


class SampledKernel(BaseKernel):
    name = "sampled"
    continuous = False
    description = """Sampled Kernel

    q(x_i, s_j, y_k) given as a value tensor on the quadrature grid (x, s)
    and the fiber grid (y). Evaluation is exact-grid only; no interpolation.

    Shape: {}
    """

    def __init__(self, domain, values: np.ndarray, grid: QuadratureGrid, fiber_grid: QuadratureGrid, source: str = None):
        super().__init__(domain)
        values = np.array(values, dtype=complex)
        expected = (grid.size, grid.size, fiber_grid.size)
        if values.shape != expected:
            raise InvalidArgumentError(f"Sampled kernel tensor has shape {values.shape}, grid needs {expected}")
        if not np.all(np.isfinite(values)):
            raise EvaluationError("Sampled kernel tensor contains non-finite values")
        values.setflags(write=False)
        self.values = values
        self.grid = grid
        self.fiber_grid = fiber_grid
        self.source = source
        self.description = self.description.format(values.shape)

    @classmethod
    def from_kernel(cls, kernel: BaseKernel, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> "SampledKernel":
        """Sample any kernel onto the grid"""
        values = np.stack([kernel.fiber_samples(grid, alpha) for alpha in fiber_grid.nodes], axis=-1)
        return cls(kernel.domain, values, grid, fiber_grid)

    @classmethod
    def from_file(cls, path, domain, grid: QuadratureGrid, fiber_grid: QuadratureGrid) -> "SampledKernel":
        logger.debug("Reading sampled kernel tensor from %s", path)
        return cls(domain, read_tensor(path), grid, fiber_grid, source=str(path))

    def evaluate(self, x, s, y):
        ix = self.grid.locate(x)
        js = self.grid.locate(s)
        ky = self.fiber_grid.locate(y)
        return self.values[ix, js, ky]

    def fiber_samples(self, grid: QuadratureGrid, alpha) -> np.ndarray:
        if not grid.same_as(self.grid):
            raise InvalidArgumentError("Sampled kernel is evaluated on a grid it was not sampled on")
        return self.values[:, :, int(self.fiber_grid.locate(alpha))]

    def parameters(self) -> dict:
        return {"shape": list(self.values.shape)}

    def to_spec(self) -> dict:
        return {"sampled": self.source}
