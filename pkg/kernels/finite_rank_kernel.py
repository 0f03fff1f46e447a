from typing import List, Tuple

import numpy as np

from core.errors import InvalidArgumentError
from kernels.base_kernel import BaseKernel
from kernels.basis import Factor, parse_factor


class FiniteRankKernel(BaseKernel):
    name = "finite_rank"
    description = """Finite-Rank (Degenerate) Kernel

    q(x, s, y) = sum_j a_j(x, y) * b_j(s, y)

    Each factor is coef * basis(point) * basis(y) with basis functions from
    {{one, t, t2, sin, cos, legendre-k}}. The fiber operators have rank at
    most r, so the Fredholm series terminate after r terms.

    Terms: {}
    """

    def __init__(self, domain, terms: List[Tuple[Factor, Factor]]):
        super().__init__(domain)
        if not terms:
            raise InvalidArgumentError("A finite-rank kernel needs at least one term")
        self.terms = [(parse_factor(a), parse_factor(b)) for a, b in terms]
        self.description = self.description.format(
            " + ".join(f"[{a.to_spec()}]*[{b.to_spec()}]" for a, b in self.terms)
        )

    @property
    def rank(self) -> int:
        return len(self.terms)

    def evaluate(self, x, s, y):
        total = 0
        for a, b in self.terms:
            total = total + a.evaluate(x, y, self.domain) * b.evaluate(s, y, self.domain)
        return np.asarray(total, dtype=complex)

    def parameters(self) -> dict:
        return {"terms": [{"a": a.to_spec(), "b": b.to_spec()} for a, b in self.terms]}

    def to_spec(self) -> dict:
        return {"finite_rank": self.parameters()["terms"]}
