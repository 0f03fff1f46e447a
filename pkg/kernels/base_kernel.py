from abc import ABC, abstractmethod

import numpy as np

from core.errors import EvaluationError
from core.grid import Domain, QuadratureGrid


class BaseKernel(ABC):
    description = "Base kernel class - not for direct use"
    name = None
    # Continuous kernels put the problem in the L2(Omega^2) setting
    continuous = True

    def __init__(self, domain: Domain):
        self.domain = domain

    @abstractmethod
    def evaluate(self, x: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        Evaluate q(x, s, y) for broadcastable point arrays of shape (..., dim)
        Returns a complex array of the broadcast shape without the last axis
        """
        pass

    @abstractmethod
    def parameters(self) -> dict:
        """Parameters as they appear in a problem file"""
        pass

    def fiber_samples(self, grid: QuadratureGrid, alpha: np.ndarray) -> np.ndarray:
        """K[i, j] = q(x_i, x_j, alpha) over the grid nodes"""
        nodes = grid.nodes
        alpha = np.asarray(alpha, dtype=float).reshape(1, 1, -1)
        samples = np.asarray(self.evaluate(nodes[:, None, :], nodes[None, :, :], alpha), dtype=complex)
        samples = np.broadcast_to(samples, (grid.size, grid.size))
        if not np.all(np.isfinite(samples)):
            raise EvaluationError(f"{self.name} kernel produced non-finite samples at alpha={alpha.ravel()}")
        return samples

    def to_spec(self) -> dict:
        return {"builtin": self.name, **self.parameters()}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.parameters().items())
        return f"{self.__class__.__name__}({params})"
