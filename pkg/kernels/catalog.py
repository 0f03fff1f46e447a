import importlib
import inspect
import logging
import os
from typing import Dict, Type

from core.errors import InvalidArgumentError
from core.grid import Domain, QuadratureGrid
from kernels.base_kernel import BaseKernel
from kernels.basis import parse_complex

logger = logging.getLogger(__name__)

# Modules in this package that hold no kernel classes
_SKIP_MODULES = {"__init__.py", "base_kernel.py", "basis.py", "catalog.py"}
# Builtin parameters that accept [re, im] pairs
_COMPLEX_PARAMETERS = {"value", "coef", "amplitude"}


def load_kernels() -> Dict[str, Type[BaseKernel]]:
    """Discover every BaseKernel subclass in the kernels package, keyed by its name"""
    kernels = {}
    kernels_dir = os.path.dirname(__file__)

    for file in sorted(os.listdir(kernels_dir)):
        if file.endswith(".py") and file not in _SKIP_MODULES:
            module_name = f"kernels.{file[:-3]}"
            try:
                module = importlib.import_module(module_name)
            except ImportError as e:
                logger.warning("Error importing %s: %s", module_name, e)
                continue

            for item in dir(module):
                obj = getattr(module, item)
                if (
                    isinstance(obj, type)
                    and issubclass(obj, BaseKernel)
                    and obj is not BaseKernel
                    and obj.__module__ == module.__name__
                ):
                    kernels[obj.name] = obj
    return kernels


def build_kernel(spec: dict, domain: Domain, grid: QuadratureGrid = None,
                 fiber_grid: QuadratureGrid = None, base_dir: str = None) -> BaseKernel:
    """Build a kernel from a problem-file fragment.

    {"builtin": name, **params} | {"finite_rank": [{"a": ..., "b": ...}, ...]} | {"sampled": path}
    """
    if not isinstance(spec, dict):
        raise InvalidArgumentError(f"Kernel specification must be an object, got {spec!r}")
    modes = [key for key in ("builtin", "finite_rank", "sampled") if key in spec]
    if len(modes) != 1:
        raise InvalidArgumentError("Kernel specification needs exactly one of 'builtin', 'finite_rank', 'sampled'")
    mode = modes[0]
    catalog = load_kernels()

    if mode == "finite_rank":
        if set(spec) != {"finite_rank"}:
            raise InvalidArgumentError(f"Unknown kernel fields: {', '.join(sorted(set(spec) - {'finite_rank'}))}")
        terms = spec["finite_rank"]
        if not isinstance(terms, list):
            raise InvalidArgumentError("'finite_rank' must be a list of {a, b} terms")
        pairs = []
        for term in terms:
            if not isinstance(term, dict) or set(term) != {"a", "b"}:
                raise InvalidArgumentError(f"Each finite-rank term needs exactly the fields 'a' and 'b', got {term!r}")
            pairs.append((term["a"], term["b"]))
        return catalog["finite_rank"](domain, pairs)

    if mode == "sampled":
        if set(spec) != {"sampled"}:
            raise InvalidArgumentError(f"Unknown kernel fields: {', '.join(sorted(set(spec) - {'sampled'}))}")
        if grid is None or fiber_grid is None:
            raise InvalidArgumentError("A sampled kernel needs the quadrature and fiber grids")
        path = spec["sampled"]
        if base_dir and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return catalog["sampled"].from_file(path, domain, grid, fiber_grid)

    name = spec["builtin"]
    kernel_class = catalog.get(name)
    if kernel_class is None or name in ("finite_rank", "sampled"):
        builtins = sorted(k for k in catalog if k not in ("finite_rank", "sampled"))
        raise InvalidArgumentError(f"Unknown builtin kernel '{name}' (choose from {', '.join(builtins)})")

    params = {k: v for k, v in spec.items() if k != "builtin"}
    accepted = set(inspect.signature(kernel_class.__init__).parameters) - {"self", "domain"}
    unknown = set(params) - accepted
    if unknown:
        raise InvalidArgumentError(f"Unknown parameters for kernel '{name}': {', '.join(sorted(unknown))}")
    for key in _COMPLEX_PARAMETERS & set(params):
        params[key] = parse_complex(params[key], key)
    return kernel_class(domain, **params)
