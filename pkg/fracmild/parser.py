"""
Problem files and the expression grammar they use.

Expressions are compiled into closures over numpy, never evaluated with eval:

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("+" | "-") unary | power
    power := atom (("^" | "**") unary)?
    atom  := number | name | name "(" expr ")" | "(" expr ")"
"""

import math
import re
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Literal, Optional, Union

import numpy as np
import tomlkit
from pydantic import BaseModel, Extra, ValidationError, root_validator, validator
from tomlkit.exceptions import TOMLKitError

from fracmild.errors import ParameterError, ProblemFileError
from fracmild.helper import as_state, state_norm
from fracmild.log import get_logger
from fracmild.models import (
    DelaySpec,
    Impulse,
    LipschitzData,
    ProblemSpec,
    StateMap,
)
from fracmild.operators import SectorialParams, SpectralOperator, make_heat_operator

logger = get_logger(__name__)

token_pattern = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)

FUNCTIONS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "log": np.log,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

Node = Callable[[dict[str, Any]], Any]


class TokenType(Enum):
    NUMBER = "number"
    NAME = "name"
    OP = "op"
    END = "end"


def tokenize(text: str) -> list[tuple[TokenType, str]]:
    tokens = []
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = token_pattern.match(text, position)
        if match is None or match.end() == position:
            raise ProblemFileError(
                f"unexpected character {text[position]!r} at {position} in {text!r}"
            )
        kind = match.lastgroup
        assert kind is not None
        tokens.append((TokenType(kind), match.group(kind)))
        position = match.end()
    tokens.append((TokenType.END, ""))
    return tokens


class Expression:
    """A compiled arithmetic expression in a fixed set of variables."""

    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.variables = variables
        self._tokens = tokenize(text)
        self._position = 0
        self._node = self._expr()
        if self._peek()[0] is not TokenType.END:
            raise ProblemFileError(
                f"unexpected {self._peek()[1]!r} in expression {text!r}"
            )
        del self._tokens

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        missing = set(self.variables) - set(env)
        if missing:
            raise ProblemFileError(
                f"expression {self.text!r} needs {', '.join(sorted(missing))}"
            )
        return self._node(env)

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"

    def _peek(self) -> tuple[TokenType, str]:
        return self._tokens[self._position]

    def _next(self) -> tuple[TokenType, str]:
        token = self._tokens[self._position]
        self._position += 1
        return token

    def _expect(self, symbol: str) -> None:
        kind, value = self._next()
        if kind is not TokenType.OP or value != symbol:
            raise ProblemFileError(
                f"expected {symbol!r}, got {value or 'end'!r} in {self.text!r}"
            )

    def _expr(self) -> Node:
        node = self._term()
        while self._peek() in ((TokenType.OP, "+"), (TokenType.OP, "-")):
            _, op = self._next()
            node = _binary(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while self._peek() in ((TokenType.OP, "*"), (TokenType.OP, "/")):
            _, op = self._next()
            node = _binary(op, node, self._unary())
        return node

    def _unary(self) -> Node:
        match self._peek():
            case (TokenType.OP, "-"):
                self._next()
                operand = self._unary()
                return lambda env: -operand(env)
            case (TokenType.OP, "+"):
                self._next()
                return self._unary()
        return self._power()

    def _power(self) -> Node:
        base = self._atom()
        if self._peek() in ((TokenType.OP, "^"), (TokenType.OP, "**")):
            self._next()
            exponent = self._unary()
            return lambda env: np.power(base(env), exponent(env))
        return base

    def _atom(self) -> Node:
        kind, value = self._next()
        match kind:
            case TokenType.NUMBER:
                number = float(value)
                return lambda env: number
            case TokenType.NAME if value in FUNCTIONS:
                func = FUNCTIONS[value]
                self._expect("(")
                argument = self._expr()
                self._expect(")")
                return lambda env: func(argument(env))
            case TokenType.NAME if value in self.variables:
                return lambda env: env[value]
            case TokenType.NAME if value in CONSTANTS:
                constant = CONSTANTS[value]
                return lambda env: constant
            case TokenType.NAME:
                raise ProblemFileError(
                    f"unknown name {value!r} in {self.text!r}; "
                    f"allowed variables: {', '.join(self.variables) or 'none'}"
                )
            case TokenType.OP if value == "(":
                node = self._expr()
                self._expect(")")
                return node
        raise ProblemFileError(f"unexpected {value or 'end'!r} in {self.text!r}")


def _binary(op: str, left: Node, right: Node) -> Node:
    match op:
        case "+":
            return lambda env: left(env) + right(env)
        case "-":
            return lambda env: left(env) - right(env)
        case "*":
            return lambda env: left(env) * right(env)
        case "/":
            return lambda env: np.true_divide(left(env), right(env))
    raise ProblemFileError(f"unknown operator {op!r}")


def compile_expression(text: str, variables: tuple[str, ...] = ("t",)) -> Expression:
    return Expression(text, variables)


def scalar_function(value: Union[float, str], variable: str) -> Callable:
    """A number or an expression in one variable, evaluated elementwise."""
    if isinstance(value, str):
        expression = compile_expression(value, (variable,))
        return lambda x: np.broadcast_to(
            np.asarray(expression(x), dtype=float), np.shape(x)
        ).astype(float)
    constant = float(value)
    return lambda x: np.full(np.shape(x), constant)


# problem file sections


class Section(BaseModel):
    class Config:
        extra = Extra.forbid


Coordinates = Union[float, str, list[Union[float, str]]]


class ProblemSection(Section):
    alpha: float
    T: float
    d: float = 0.0
    name: str = ""


class SectorialSection(Section):
    M: float
    theta: float
    mu: float = 0.0


class OperatorSection(Section):
    type: Literal["heat", "diagonal", "scalar"]
    modes: Optional[int] = None
    eigenvalues: Optional[list[float]] = None
    eigenvalue: Optional[float] = None
    sectorial: Optional[SectorialSection] = None

    @root_validator(skip_on_failure=True)
    def check_shape(cls, values):
        required = {"heat": "modes", "diagonal": "eigenvalues", "scalar": "eigenvalue"}
        key = required[values["type"]]
        if values.get(key) is None:
            raise ValueError(f"operator type {values['type']!r} needs {key!r}")
        return values


class HistorySection(Section):
    phi: Coordinates = 0.0
    varphi: Coordinates = 0.0


class ForcingSection(Section):
    builtin: Literal["zero", "constant", "linear-delay", "paper49", "delay49"] = "zero"
    c: Union[float, list[float]] = 0.0
    k: float = 1.0


class DelaySection(Section):
    form: Literal["none", "constant", "state"] = "none"
    tau: float = 0.0
    rho1: Union[float, str] = 0.0
    rho2: Union[float, str] = 1.0


class MapSection(Section):
    builtin: Literal["constant", "saturating"] = "constant"
    value: Union[float, list[float]] = 0.0
    a: float = 1.0
    b: float = 1.0
    mode: Literal["direction", "coordinatewise"] = "direction"

    @validator("b")
    def check_b(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("b must be positive")
        return value


class ImpulseSection(Section):
    t: float
    I: MapSection = MapSection()
    Q: MapSection = MapSection()


class SolverSection(Section):
    h: Optional[float] = None
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    quad_refine: Optional[int] = None

    @validator("h", "tol")
    def check_positive(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("must be positive")
        return value

    @validator("max_iter", "quad_refine")
    def check_count(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("must be at least 1")
        return value


class LipschitzSection(Section):
    M: Optional[float] = None
    l_f: Union[float, str] = 0.0
    l_i: float = 0.0
    l_j: float = 0.0
    m_f: Union[float, str] = 0.0
    C_i: float = 0.0
    C_j: float = 0.0
    Omega_f: Optional[str] = None
    m: Optional[int] = None
    phi0_norm: Optional[float] = None
    varphi0_norm: Optional[float] = None
    s_max: float = 1e6


class ProblemFile(Section):
    problem: ProblemSection
    operator: OperatorSection
    history: HistorySection = HistorySection()
    forcing: ForcingSection = ForcingSection()
    delay: DelaySection = DelaySection()
    impulses: list[ImpulseSection] = []
    solver: SolverSection = SolverSection()
    lipschitz: Optional[LipschitzSection] = None


class LoadedProblem(BaseModel):
    spec: ProblemSpec
    solver: SolverSection
    lipschitz: Optional[LipschitzData]
    source: ProblemFile


# builtins


def build_operator(section: OperatorSection, alpha: float) -> SpectralOperator:
    match section.type:
        case "heat":
            assert section.modes is not None
            op = make_heat_operator(section.modes)
        case "diagonal":
            op = SpectralOperator(eigenvalues=section.eigenvalues, label="diagonal")
        case _:
            op = SpectralOperator(eigenvalues=[section.eigenvalue], label="scalar")
    if section.sectorial is not None:
        params = SectorialParams(alpha=alpha, **section.sectorial.dict())
        op = op.copy(update={"sectorial_params": params})
    return op


def build_history(value: Coordinates, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """A history function t -> (len(t), dim); strings may use t and n (1-based)."""
    entries = value if isinstance(value, list) else [value] * dim
    if len(entries) != dim:
        raise ProblemFileError(f"expected {dim} history entries, got {len(entries)}")
    n = np.arange(1, dim + 1, dtype=float)
    compiled = [
        compile_expression(entry, ("t", "n")) if isinstance(entry, str) else entry
        for entry in entries
    ]

    def history(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float).reshape(-1)
        table = np.empty((t.size, dim))
        for column, entry in enumerate(compiled):
            if isinstance(entry, Expression):
                table[:, column] = np.broadcast_to(entry(t, n[column]), t.shape)
            else:
                table[:, column] = float(entry)
        return table

    return history


def build_forcing(section: ForcingSection, dim: int):
    match section.builtin:
        case "zero":
            return lambda s, delayed: np.zeros_like(delayed)
        case "constant":
            c = as_state(section.c, dim)
            return lambda s, delayed: np.broadcast_to(c, delayed.shape).copy()
        case "linear-delay":
            k = section.k
            return lambda s, delayed: k * delayed
        case "paper49" | "delay49":
            return lambda s, delayed: delayed / 49.0
    raise ProblemFileError(f"unknown forcing {section.builtin!r}")


def build_delay(section: DelaySection) -> DelaySpec:
    return DelaySpec(
        form=section.form,
        tau=section.tau,
        rho1=scalar_function(section.rho1, "t") if section.form == "state" else None,
        rho2=scalar_function(section.rho2, "s") if section.form == "state" else None,
    )


def build_map(section: MapSection, dim: int) -> StateMap:
    match section.builtin, section.mode:
        case "constant", _:
            value = as_state(section.value, dim)
            return lambda u: value.copy()
        case "saturating", "direction":
            a, b = section.a, section.b
            direction = np.zeros(dim)
            direction[0] = 1.0

            def along_first_mode(u: np.ndarray) -> np.ndarray:
                norm = state_norm(u)
                return a * norm / (b + norm) * direction

            return along_first_mode
        case "saturating", "coordinatewise":
            a, b = section.a, section.b
            return lambda u: a * np.abs(u) / (b + np.abs(u))
    raise ProblemFileError(f"unknown impulse map {section.builtin!r}")


def _rate(value: Union[float, str]) -> Union[float, Callable]:
    return scalar_function(value, "t") if isinstance(value, str) else value


def build_lipschitz(
    section: LipschitzSection, spec: ProblemSpec
) -> LipschitzData:
    phi0 = spec.history(np.array([0.0]))[0]
    varphi0 = spec.history_derivative(np.array([0.0]))[0]
    return LipschitzData(
        M=section.M,
        l_f=_rate(section.l_f),
        l_i=section.l_i,
        l_j=section.l_j,
        m_f=_rate(section.m_f),
        C_i=section.C_i,
        C_j=section.C_j,
        Omega_f=(
            scalar_function(section.Omega_f, "s")
            if section.Omega_f is not None
            else None
        ),
        m=len(spec.impulses) if section.m is None else section.m,
        phi0_norm=(
            state_norm(phi0) if section.phi0_norm is None else section.phi0_norm
        ),
        varphi0_norm=(
            state_norm(varphi0)
            if section.varphi0_norm is None
            else section.varphi0_norm
        ),
        s_max=section.s_max,
    )


def prune_unknown(model: type[BaseModel], data: Any, path: str = "") -> Any:
    """Drop keys ``model`` does not declare, logging each one."""
    if not isinstance(data, dict):
        return data
    kept = {}
    for key, value in data.items():
        field = model.__fields__.get(key)
        if field is None:
            logger.warning("ignoring unknown key %s%s", path, key)
            continue
        inner = field.type_
        if isinstance(inner, type) and issubclass(inner, BaseModel):
            if isinstance(value, list):
                value = [prune_unknown(inner, item, f"{path}{key}.") for item in value]
            else:
                value = prune_unknown(inner, value, f"{path}{key}.")
        kept[key] = value
    return kept


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_problem(
    text: str, *, strict: bool = True, modes: Optional[int] = None
) -> LoadedProblem:
    """Build a problem from TOML text; ``modes`` overrides a heat operator's size."""
    try:
        raw = tomlkit.parse(text).unwrap()
    except TOMLKitError as error:
        raise ProblemFileError(f"not a valid TOML document: {error}") from error
    if not strict:
        raw = prune_unknown(ProblemFile, raw)
    try:
        source = ProblemFile.parse_obj(raw)
        if modes is not None:
            if source.operator.type != "heat":
                raise ProblemFileError(
                    f"modes only apply to heat operators, not {source.operator.type!r}"
                )
            source.operator.modes = modes
        op = build_operator(source.operator, source.problem.alpha)
        dim = op.dim
        spec = ProblemSpec(
            alpha=source.problem.alpha,
            T=source.problem.T,
            d=source.problem.d,
            op=op,
            phi=build_history(source.history.phi, dim),
            varphi=build_history(source.history.varphi, dim),
            forcing=build_forcing(source.forcing, dim),
            delay=build_delay(source.delay),
            impulses=[
                Impulse(
                    t=impulse.t,
                    I=build_map(impulse.I, dim),
                    Q=build_map(impulse.Q, dim),
                    label=f"impulse {index}",
                )
                for index, impulse in enumerate(source.impulses, start=1)
            ],
            name=source.problem.name,
        )
        # history must be finite on [-d, 0] before anything runs
        nodes = np.linspace(-spec.d, 0.0, 33)
        try:
            with np.errstate(divide="ignore", invalid="ignore"):
                spec.history(nodes)
                spec.history_derivative(nodes)
        except ParameterError as error:
            raise ProblemFileError(f"[history] {error}") from error
        lipschitz = (
            build_lipschitz(source.lipschitz, spec)
            if source.lipschitz is not None
            else None
        )
    except ValidationError as error:
        raise ProblemFileError(_describe(error)) from error
    return LoadedProblem(
        spec=spec, solver=source.solver, lipschitz=lipschitz, source=source
    )


def load_problem(
    path: Path, *, strict: bool = True, modes: Optional[int] = None
) -> LoadedProblem:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as error:
        raise ProblemFileError(f"cannot read {path}: {error}") from error
    logger.info("loading problem file %s", path)
    return parse_problem(text, strict=strict, modes=modes)
