"""Bernstein functions and the subordinators they generate.

A Bernstein function ``f`` fixes a subordinator ``H`` through the Laplace
identity ``E[exp(-mu H(t))] = exp(-t f(mu))``.  Four families are supported:

========  ==================  ===========================
kind      f(x)                H(t)
========  ==================  ===========================
stable    x**alpha            one-sided alpha-stable
gamma     a*log(1 + x/b)      Gamma(shape=a*t, rate=b)
poisson   beta*(1 - e**-x)    Poisson(beta*t)
linear    b*x                 b*t (deterministic)
========  ==================  ===========================
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import ParameterError

KINDS = ("stable", "gamma", "poisson", "linear")


class DerivativeUnavailableError(ArithmeticError):
    """A derivative of the requested order cannot be represented."""


@dataclass(frozen=True)
class BernsteinFn:
    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.kind not in KINDS:
            raise ParameterError(f"unknown Bernstein kind {self.kind!r}; expected one of {KINDS}")
        arity = {"stable": 1, "gamma": 2, "poisson": 1, "linear": 1}[self.kind]
        if len(self.params) != arity:
            raise ParameterError(f"{self.kind} takes {arity} parameter(s), got {self.params}")
        if any(not math.isfinite(v) or v <= 0 for v in self.params):
            raise ParameterError(f"{self.kind} parameters must be positive, got {self.params}")
        if self.kind == "stable" and not self.params[0] < 1:
            raise ParameterError(f"stable index must lie in (0, 1), got {self.params[0]}")

    @classmethod
    def stable(cls, alpha: float) -> BernsteinFn:
        return cls("stable", (alpha,))

    @classmethod
    def gamma(cls, a: float, b: float) -> BernsteinFn:
        return cls("gamma", (a, b))

    @classmethod
    def poisson(cls, beta: float) -> BernsteinFn:
        return cls("poisson", (beta,))

    @classmethod
    def linear(cls, b: float) -> BernsteinFn:
        return cls("linear", (b,))

    @classmethod
    def parse(cls, text: str) -> BernsteinFn:
        """Parse ``kind:p1[,p2]``, e.g. ``stable:0.5`` or ``gamma:1,2``."""
        kind, _, rest = text.partition(":")
        try:
            params = tuple(float(tok) for tok in rest.split(",") if tok.strip())
        except ValueError as exc:
            raise ParameterError(f"cannot parse Bernstein function {text!r}") from exc
        return cls(kind.strip().lower(), params)

    def __str__(self) -> str:
        return f"{self.kind}:{','.join(repr(v) for v in self.params)}"


@dataclass(frozen=True)
class SubordinatorSample:
    t: float
    value: float


def _check_x(x: float) -> None:
    if not x > 0:
        raise ParameterError(f"Bernstein functions are evaluated at x > 0, got {x}")


def bernstein_value(f: BernsteinFn, x: float) -> float:
    _check_x(x)
    if f.kind == "stable":
        return x ** f.params[0]
    if f.kind == "gamma":
        a, b = f.params
        return a * math.log1p(x / b)
    if f.kind == "poisson":
        return -f.params[0] * math.expm1(-x)
    return f.params[0] * x


def log_abs_deriv(f: BernsteinFn, x: float, n: int) -> tuple[int, float]:
    """Sign and log-magnitude of the ``n``-th derivative of ``f`` at ``x``.

    For ``n >= 1`` the sign is ``(-1)**(n+1)`` (or 0), which is what makes the
    composition sums over derivatives free of cancellation.  Working with the
    logarithm keeps ``n`` in the hundreds representable.
    """
    _check_x(x)
    if n < 0:
        raise ParameterError(f"derivative order must be >= 0, got {n}")
    if n == 0:
        return 1, math.log(bernstein_value(f, x))
    sign = 1 if n % 2 == 1 else -1
    if f.kind == "stable":
        alpha = f.params[0]
        # |alpha (alpha-1) ... (alpha-n+1)| = alpha Gamma(n-alpha) / Gamma(1-alpha)
        return sign, (
            math.log(alpha) + gammaln(n - alpha) - gammaln(1 - alpha) + (alpha - n) * math.log(x)
        )
    if f.kind == "gamma":
        a, b = f.params
        return sign, math.log(a) + gammaln(n) - n * math.log(b + x)
    if f.kind == "poisson":
        return sign, math.log(f.params[0]) - x
    if n == 1:
        return 1, math.log(f.params[0])
    return 0, -math.inf


def bernstein_nth_deriv(f: BernsteinFn, x: float, n: int) -> float:
    if n == 0:
        return bernstein_value(f, x)
    if f.kind == "stable":
        alpha = f.params[0]
        coef = 1.0
        for k in range(n):
            coef *= alpha - k
        return coef * x ** (alpha - n)
    sign, logabs = log_abs_deriv(f, x, n)
    return sign * math.exp(logabs) if sign else 0.0


def reciprocal_derivatives(f: BernsteinFn, x: float, n_max: int) -> list[float]:
    """Derivatives of ``1/f`` at ``x`` for orders ``0..n_max``.

    Power rule for stable and linear kinds.  Otherwise the Leibniz identity
    ``sum_j C(n, j) f^(j) (1/f)^(n-j) = 0`` is solved order by order; every
    term in it carries the same sign, so the recursion does not cancel.
    """
    _check_x(x)
    try:
        out = _reciprocal_derivatives(f, x, n_max)
    except OverflowError:
        out = [math.inf]
    if not all(math.isfinite(v) for v in out):
        raise DerivativeUnavailableError(
            f"derivatives of 1/f for {f} at x={x} overflow before order {n_max}"
        )
    return out


def _reciprocal_derivatives(f: BernsteinFn, x: float, n_max: int) -> list[float]:
    if f.kind == "stable":
        alpha = f.params[0]
        out, coef = [], 1.0
        for n in range(n_max + 1):
            out.append(coef * x ** (-alpha - n))
            coef *= -alpha - n
    elif f.kind == "linear":
        b = f.params[0]
        out = [(-1) ** n * math.factorial(n) / (b * x ** (n + 1)) for n in range(n_max + 1)]
    else:
        fd = [bernstein_nth_deriv(f, x, j) for j in range(n_max + 1)]
        out = [1.0 / fd[0]]
        for n in range(1, n_max + 1):
            acc = math.fsum(math.comb(n, j) * fd[j] * out[n - j] for j in range(1, n + 1))
            out.append(-acc / fd[0])
    return out


def reciprocal_nth_deriv(f: BernsteinFn, x: float, n: int) -> float:
    if n < 0:
        raise ParameterError(f"derivative order must be >= 0, got {n}")
    return reciprocal_derivatives(f, x, n)[n]


def finite_difference_deriv(
    func: Callable[[float], float],
    x: float,
    n: int,
    step: float | None = None,
    levels: int = 4,
) -> float:
    """Central-difference ``n``-th derivative with Richardson extrapolation.

    The step starts at ``step`` (default ``0.05 * |x|``) and is halved at each
    level; the tableau removes the ``h**2, h**4, ...`` error terms.
    """
    h0 = step if step is not None else 0.05 * abs(x)
    if h0 <= 0:
        raise ParameterError("finite-difference step must be positive")

    def central(h: float) -> float:
        acc = math.fsum(
            (-1) ** k * math.comb(n, k) * func(x + (n / 2 - k) * h) for k in range(n + 1)
        )
        return acc / h**n

    table = [central(h0 / 2**lv) for lv in range(levels)]
    for col in range(1, levels):
        factor = 4.0**col
        table = [(factor * table[r + 1] - table[r]) / (factor - 1) for r in range(len(table) - 1)]
    return table[0]


def draw_subordinator(
    f: BernsteinFn, t: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """``size`` independent draws of ``H(t)``."""
    if t < 0:
        raise ParameterError(f"time must be nonnegative, got {t}")
    if f.kind == "linear":
        return np.full(size, f.params[0] * t)
    if f.kind == "poisson":
        return rng.poisson(f.params[0] * t, size).astype(np.float64)
    if f.kind == "gamma":
        a, b = f.params
        return rng.gamma(a * t, 1.0 / b, size)
    if t == 0:
        return np.zeros(size)
    alpha = f.params[0]
    # Kanter's representation of the one-sided stable law with E exp(-mu S) = exp(-mu**alpha)
    u = np.pi * (1.0 - rng.random(size))  # (0, pi], avoids sin(0)
    e = rng.standard_exponential(size)
    s = (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * u) / e
    ) ** ((1.0 - alpha) / alpha)
    return t ** (1.0 / alpha) * s


def sample_subordinator(f: BernsteinFn, t: float, rng: np.random.Generator) -> SubordinatorSample:
    value = draw_subordinator(f, t, rng, 1)[0]
    return SubordinatorSample(t, int(value) if f.kind == "poisson" else float(value))


def subordinator_path(
    f: BernsteinFn, times: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """``H`` at increasing ``times`` from independent stationary increments."""
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ParameterError("times must be nonnegative and nondecreasing")
    gaps = np.diff(times, prepend=0.0)
    incr = np.array([draw_subordinator(f, dt, rng, 1)[0] for dt in gaps])
    return np.cumsum(incr)
