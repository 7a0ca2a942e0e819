import json
import logging
import re
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from src.engine.problems import check_derivatives, manufactured
from src.models.errors import InvalidArgumentError
from src.models.mesh import Rectangle
from src.models.problem import PenaltyPolicy, ProblemSpec, ScalarField, VectorField

logger = logging.getLogger("Expressions")

_X, _Y = sympy.symbols("x y", real=True)
_FUNCTIONS = {"exp": sympy.exp, "atan": sympy.atan, "sqrt": sympy.sqrt}
_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_ALLOWED_CHARS = re.compile(r"^[A-Za-z_0-9+\-*/^().,\s]*$")


def compile_expression(text: Union[str, float, int], eps: float = 0.0) -> ScalarField:
    """Compile an arithmetic expression in x, y (or x1, x2) into a vectorized callable.

    Allowed: + - * / ^ ** parentheses, exp, atan, sqrt and the constants pi and eps.
    """
    if isinstance(text, (int, float)):
        value = float(text)
        return lambda x, y: np.full(np.shape(x), value)
    if not isinstance(text, str) or not text.strip():
        raise InvalidArgumentError(f"Expression must be a non-empty string, got {text!r}")
    if not _ALLOWED_CHARS.match(text):
        raise InvalidArgumentError(f"Expression '{text}' contains unsupported characters")

    local_dict = {"x": _X, "y": _Y, "x1": _X, "x2": _Y, "pi": sympy.pi, "eps": sympy.Float(eps)}
    local_dict.update(_FUNCTIONS)
    for name in _NAME.findall(text):
        if name not in local_dict:
            raise InvalidArgumentError(f"Unknown name '{name}' in expression '{text}'")

    global_dict = {"Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational,
                   "Symbol": sympy.Symbol, "__builtins__": {}}
    try:
        expr = parse_expr(text, local_dict=local_dict, global_dict=global_dict,
                          transformations=_TRANSFORMATIONS, evaluate=True)
    except (SyntaxError, TypeError, ValueError, AttributeError, NameError) as exc:
        raise InvalidArgumentError(f"Cannot parse expression '{text}': {exc}")
    if not isinstance(expr, sympy.Expr):
        raise InvalidArgumentError(f"Expression '{text}' is not scalar arithmetic")
    if not expr.free_symbols <= {_X, _Y}:
        raise InvalidArgumentError(f"Expression '{text}' uses unknown symbols {expr.free_symbols}")

    compiled = sympy.lambdify((_X, _Y), expr, modules="numpy")

    def field(x, y):
        return np.broadcast_to(np.asarray(compiled(x, y), dtype=float), np.shape(x))
    field.expression = text
    return field


def compile_vector(texts, eps: float = 0.0) -> VectorField:
    if not isinstance(texts, (list, tuple)) or len(texts) != 2:
        raise InvalidArgumentError(f"Vector field needs two component expressions, got {texts!r}")
    first = compile_expression(texts[0], eps)
    second = compile_expression(texts[1], eps)
    return lambda x, y: (first(x, y), second(x, y))


def _check_divergence(problem: ProblemSpec, step: float = 1e-6, tol: float = 1e-4) -> None:
    dom = problem.domain
    xs = np.linspace(dom.x0 + 2 * step, dom.x1 - 2 * step, 5)
    ys = np.linspace(dom.y0 + 2 * step, dom.y1 - 2 * step, 5)
    x, y = np.meshgrid(xs, ys, indexing="ij")
    fd = ((np.asarray(problem.zeta(x + step, y)[0]) - np.asarray(problem.zeta(x - step, y)[0]))
          + (np.asarray(problem.zeta(x, y + step)[1]) - np.asarray(problem.zeta(x, y - step)[1]))) / (2 * step)
    given = np.asarray(problem.div_zeta(x, y), dtype=float)
    gap = float((np.abs(given - fd) / np.maximum(1.0, np.abs(given))).max())
    if gap > tol:
        raise InvalidArgumentError(f"div_zeta of {problem.name} disagrees with finite differences ({gap:.2e})")


def problem_from_config(config: Dict, eps: Optional[float] = None) -> ProblemSpec:
    """Build a problem from a dict of expression strings

    A given eps replaces the configured one before the expressions are
    compiled, so every field that mentions eps sees the new value.
    """
    if eps is not None:
        config = dict(config, eps=float(eps))
    required = ("domain", "eps", "zeta", "div_zeta")
    missing = [key for key in required if key not in config]
    if missing:
        raise InvalidArgumentError(f"Problem config is missing {', '.join(missing)}")
    try:
        domain = Rectangle(*[float(v) for v in config["domain"]])
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"Invalid domain {config['domain']!r}: {exc}")
    eps = float(config["eps"])
    name = str(config.get("name", "config"))
    zeta = compile_vector(config["zeta"], eps)
    div_zeta = compile_expression(config["div_zeta"], eps)
    gamma = compile_expression(config.get("gamma", 0.0), eps)
    penalty = PenaltyPolicy.constant(float(config.get("sigma", 5.0)))
    gamma0 = config.get("gamma0")
    frozen = dict(config)

    def rebuild(value: float) -> ProblemSpec:
        return problem_from_config(frozen, eps=value)

    if "exact" in config:
        for key in ("exact_gradient", "exact_laplacian"):
            if key not in config:
                raise InvalidArgumentError(f"Config with an exact solution needs '{key}'")
        problem = manufactured(name, compile_expression(config["exact"], eps),
                               compile_vector(config["exact_gradient"], eps),
                               compile_expression(config["exact_laplacian"], eps),
                               zeta, div_zeta, gamma, eps, domain, penalty, gamma0, rebuild=rebuild)
        check_derivatives(problem)
    else:
        if "f" not in config or "g" not in config:
            raise InvalidArgumentError("Config without an exact solution needs both 'f' and 'g'")
        problem = ProblemSpec(name=name, domain=domain, eps=eps, zeta=zeta, div_zeta=div_zeta,
                              gamma=gamma, f=compile_expression(config["f"], eps),
                              g=compile_expression(config["g"], eps), gamma0=gamma0, penalty=penalty,
                              rebuild=rebuild)
    _check_divergence(problem)
    logger.info(f"Loaded problem '{name}' on {domain.as_tuple()} with eps={eps:g}")
    return problem


def load_problem_config(path: Union[str, Path], eps: Optional[float] = None) -> ProblemSpec:
    path = Path(path)
    try:
        with open(path, "r") as fh:
            config = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"{path}: invalid JSON ({exc})")
    if not isinstance(config, dict):
        raise InvalidArgumentError(f"{path}: top level must be an object")
    return problem_from_config(config, eps=eps)
