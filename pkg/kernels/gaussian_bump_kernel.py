import numpy as np

from core.errors import InvalidArgumentError
from kernels.base_kernel import BaseKernel
from kernels.basis import complex_to_spec


class GaussianBumpKernel(BaseKernel):
    name = "gaussian_bump"
    description = """Gaussian Bump Kernel

    q(x, s, y) = amplitude * exp(-(|x - s|^2 + |y - center|^2) / (2 * width^2))

    Smooth and full rank on every fiber; used for series/matrix coherence and
    grid-refinement checks.

    Parameters:
    - amplitude: {}
    - width: {}
    - center: {} (defaults to the midpoint of the domain)
    """

    def __init__(self, domain, amplitude: complex = 1.0, width: float = 0.5, center: float = None):
        super().__init__(domain)
        if not width > 0:
            raise InvalidArgumentError(f"Gaussian width must be positive, got {width}")
        if center is None:
            center = (domain.lower + domain.upper) / 2
        self.amplitude = complex(amplitude)
        self.width = float(width)
        self.center = float(center)
        self.description = self.description.format(amplitude, width, center)

    def evaluate(self, x, s, y):
        distance = np.sum((x - s) ** 2, axis=-1) + np.sum((y - self.center) ** 2, axis=-1)
        return self.amplitude * np.exp(-distance / (2 * self.width ** 2))

    def parameters(self) -> dict:
        return {"amplitude": complex_to_spec(self.amplitude), "width": self.width, "center": self.center}
