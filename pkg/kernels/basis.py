"""Named 1-D basis functions used to compose finite-rank kernels.

For dim > 1 a basis function is applied per coordinate and the results are
multiplied.
"""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from core.errors import InvalidArgumentError
from core.grid import Domain

BASIS_NAMES = ("one", "t", "t2", "sin", "cos", "legendre")


@dataclass(frozen=True)
class BasisFunction:
    name: str = "one"
    k: int = 0           # legendre degree
    freq: float = 1.0    # sin / cos frequency

    def __post_init__(self):
        if self.name not in BASIS_NAMES:
            raise InvalidArgumentError(f"Unknown basis function '{self.name}' (choose from {', '.join(BASIS_NAMES)})")
        if self.name == "legendre" and (int(self.k) != self.k or self.k < 0):
            raise InvalidArgumentError(f"Legendre degree must be a non-negative integer, got {self.k}")

    def evaluate(self, t: np.ndarray, domain: Domain) -> np.ndarray:
        """t has shape (..., dim); returns shape (...)"""
        if self.name == "one":
            return np.ones(t.shape[:-1])
        if self.name == "t":
            values = t
        elif self.name == "t2":
            values = t ** 2
        elif self.name == "sin":
            values = np.sin(self.freq * t)
        elif self.name == "cos":
            values = np.cos(self.freq * t)
        else:
            # shifted Legendre P_k on [lower, upper]
            u = 2 * (t - domain.lower) / (domain.upper - domain.lower) - 1
            coefs = np.zeros(int(self.k) + 1)
            coefs[-1] = 1.0
            values = legendre.legval(u, coefs)
        return np.prod(values, axis=-1)

    def to_spec(self):
        if self.name == "legendre":
            return f"legendre-{int(self.k)}"
        if self.name in ("sin", "cos") and self.freq != 1.0:
            return {"name": self.name, "freq": self.freq}
        return self.name


def parse_basis(spec) -> BasisFunction:
    """Accepts 'one', 't', 'legendre-2', or {'name': 'sin', 'freq': 3.0}"""
    if spec is None:
        return BasisFunction("one")
    if isinstance(spec, BasisFunction):
        return spec
    if isinstance(spec, str):
        if spec.startswith("legendre-"):
            try:
                return BasisFunction("legendre", k=int(spec.split("-", 1)[1]))
            except ValueError:
                raise InvalidArgumentError(f"Bad Legendre basis '{spec}'")
        return BasisFunction(spec)
    if isinstance(spec, dict):
        unknown = set(spec) - {"name", "k", "freq"}
        if unknown:
            raise InvalidArgumentError(f"Unknown basis fields: {', '.join(sorted(unknown))}")
        return BasisFunction(spec.get("name", "one"), k=spec.get("k", 0), freq=float(spec.get("freq", 1.0)))
    raise InvalidArgumentError(f"Cannot parse basis function from {spec!r}")


@dataclass(frozen=True)
class Factor:
    """coef * x_basis(point) * y_basis(y): one factor a_j(x, y) or b_j(s, y)"""
    x_basis: BasisFunction = BasisFunction("one")
    y_basis: BasisFunction = BasisFunction("one")
    coef: complex = 1.0

    def evaluate(self, point: np.ndarray, y: np.ndarray, domain: Domain) -> np.ndarray:
        return self.coef * self.x_basis.evaluate(point, domain) * self.y_basis.evaluate(y, domain)

    def to_spec(self) -> dict:
        spec = {"x": self.x_basis.to_spec(), "y": self.y_basis.to_spec()}
        if self.coef != 1.0:
            spec["coef"] = complex_to_spec(self.coef)
        return spec


def complex_to_spec(value: complex):
    value = complex(value)
    return value.real if value.imag == 0 else [value.real, value.imag]


def parse_complex(value, field_name: str = "value") -> complex:
    """JSON numbers or [re, im] pairs"""
    if isinstance(value, bool):
        raise InvalidArgumentError(f"{field_name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(value[0], value[1])
    raise InvalidArgumentError(f"{field_name}: expected a number or [re, im], got {value!r}")


def parse_factor(spec) -> Factor:
    if isinstance(spec, Factor):
        return spec
    if isinstance(spec, (str, type(None))):
        return Factor(parse_basis(spec))
    if not isinstance(spec, dict):
        raise InvalidArgumentError(f"Cannot parse factor from {spec!r}")
    unknown = set(spec) - {"x", "y", "coef"}
    if unknown:
        raise InvalidArgumentError(f"Unknown factor fields: {', '.join(sorted(unknown))}")
    return Factor(parse_basis(spec.get("x")), parse_basis(spec.get("y")), parse_complex(spec.get("coef", 1.0), "coef"))
