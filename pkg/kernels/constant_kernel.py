import numpy as np

from kernels.base_kernel import BaseKernel
from kernels.basis import complex_to_spec


class ConstantKernel(BaseKernel):
    name = "constant"
    description = """Constant Kernel

    q(x, s, y) = {}

    Rank one on every fiber: the fiber eigenvalue is value * |Omega|, so the
    only characteristic number is 1 / (value * |Omega|).
    """

    def __init__(self, domain, value: complex = 1.0):
        super().__init__(domain)
        self.value = complex(value)
        self.description = self.description.format(value)

    def evaluate(self, x, s, y):
        shape = np.broadcast_shapes(x.shape[:-1], s.shape[:-1], y.shape[:-1])
        return np.full(shape, self.value, dtype=complex)

    def parameters(self) -> dict:
        return {"value": complex_to_spec(self.value)}
