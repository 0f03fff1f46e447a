import numpy as np

from kernels.base_kernel import BaseKernel
from kernels.basis import complex_to_spec


class PolynomialKernel(BaseKernel):
    name = "polynomial"
    description = """Monomial Kernel

    q(x, s, y) = coef * x^p * s^r * y^t  (products over coordinates when dim > 1)

    Parameters:
    - p: {} (power of x)
    - r: {} (power of s)
    - t: {} (power of the fiber variable y)
    - coef: {}
    """

    def __init__(self, domain, p: int = 0, r: int = 0, t: int = 0, coef: complex = 1.0):
        super().__init__(domain)
        self.p = p
        self.r = r
        self.t = t
        self.coef = complex(coef)
        self.description = self.description.format(p, r, t, coef)

    def evaluate(self, x, s, y):
        return (
            self.coef
            * np.prod(x ** self.p, axis=-1)
            * np.prod(s ** self.r, axis=-1)
            * np.prod(y ** self.t, axis=-1)
        )

    def parameters(self) -> dict:
        return {"p": self.p, "r": self.r, "t": self.t, "coef": complex_to_spec(self.coef)}
