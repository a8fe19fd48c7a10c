"""The r-averaged nonlocal nonlinearity and the functionals built on it.

The averaged nonlinearity is

    N[f] = int_I exp(-i r d_xx) ( |exp(i r d_xx) f|^(p-1) exp(i r d_xx) f ) dr,

with I either the unit interval [0, 1] or a symmetric truncation [-R, R] of
the real line.  The space-time integral

    S(f) = int_I || exp(i r d_xx) f ||_{L^{p+1}}^{p+1} dr

feeds the energy functionals

    E(f)     = 1/2 ||f'||^2 - S_[0,1](f) / (p+1)
    E_inf(f) = 1/2 ||f'||^2 - S_[-R,R](f) / (p+1)

and the Weinstein quotient

    W(f) = S(f) / ( ||f||^{(p+7)/2} ||f'||^{(p-5)/2} ).

Quadrature is Gauss-Legendre: a single rule on [0, 1], composite fixed-width
panels on [-R, R].  Node contributions are accumulated in a fixed order so
results are bit-reproducible.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FieldError, OverflowBlowupError, QuadratureError
from .spectral import FOURIER, Field, Grid1D, grad_norm_sq, mass

UNIT = "unit"
LINE = "line"

DEFAULT_UNIT_ORDER = 32
DEFAULT_PANEL_ORDER = 8
DEFAULT_RADIUS = 20.0
DEFAULT_PANEL_WIDTH = 0.5

# Amplitudes beyond this abort with a blowup-suspected error instead of
# silently saturating |g|^(p-1).
AMPLITUDE_OVERFLOW = 1e30
_AMPLITUDE_FLOOR = 1e-300

_NODE_CHUNK = 128
_RADIUS_CAP = 512.0


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights on [a, b], strictly increasing and interior."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        a, b = self.interval
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise QuadratureError("nodes and weights must be 1-d arrays of equal length")
        if np.any(weights <= 0):
            raise QuadratureError("quadrature weights must be positive")
        if np.any(np.diff(nodes) <= 0):
            raise QuadratureError("quadrature nodes must be strictly increasing")
        if nodes[0] <= a or nodes[-1] >= b:
            raise QuadratureError("quadrature nodes must lie strictly inside the interval")
        if abs(float(np.sum(weights)) - (b - a)) > 1e-14 * max(1.0, b - a):
            raise QuadratureError("quadrature weights must sum to the interval length")

    @property
    def order(self) -> int:
        return self.nodes.size


def gauss_unit(order: int) -> QuadratureRule:
    """Gauss-Legendre rule with `order` nodes on [0, 1]."""
    if order < 4:
        raise QuadratureError(f"quadrature order must be >= 4, got {order}")
    xs, ws = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(0.5 * (xs + 1.0), 0.5 * ws, (0.0, 1.0))


def gauss_line(radius: float, order: int, panel_width: float = DEFAULT_PANEL_WIDTH) -> QuadratureRule:
    """Composite Gauss-Legendre rule on [-R, R], `order` nodes per panel."""
    if radius <= 0:
        raise QuadratureError(f"truncation radius must be positive, got {radius}")
    if order < 4:
        raise QuadratureError(f"quadrature order must be >= 4, got {order}")
    if panel_width <= 0:
        raise QuadratureError(f"panel width must be positive, got {panel_width}")
    n_panels = max(1, int(np.ceil(2.0 * radius / panel_width)))
    edges = np.linspace(-radius, radius, n_panels + 1)
    xs, ws = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    weights = (half[:, None] * ws[None, :]).ravel()
    return QuadratureRule(nodes, weights, (-radius, radius))


@dataclass(frozen=True)
class NonlinearitySpec:
    """Exponent, r-interval choice, and quadrature resolution.

    `order` counts nodes on [0, 1] for the unit interval and nodes per panel
    on the truncated line.  When `tail_rtol` is set, line integrals extend the
    truncation radius until the outermost panel pair contributes less than
    tail_rtol of the running total.
    """

    p: float
    interval: str = UNIT
    order: int = DEFAULT_UNIT_ORDER
    radius: float = DEFAULT_RADIUS
    panel_width: float = DEFAULT_PANEL_WIDTH
    tail_rtol: Optional[float] = None

    def __post_init__(self):
        if self.p < 1:
            raise QuadratureError(f"nonlinearity exponent must satisfy p >= 1, got {self.p}")
        if self.interval not in (UNIT, LINE):
            raise QuadratureError(f"interval must be {UNIT!r} or {LINE!r}, got {self.interval!r}")
        if self.order < 4:
            raise QuadratureError(f"quadrature order must be >= 4, got {self.order}")
        if self.interval == LINE and self.radius <= 0:
            raise QuadratureError(f"truncation radius must be positive, got {self.radius}")

    def rule(self, radius: Optional[float] = None) -> QuadratureRule:
        if self.interval == UNIT:
            return gauss_unit(self.order)
        return gauss_line(radius if radius is not None else self.radius, self.order, self.panel_width)


def unit_spec(p: float, order: int = DEFAULT_UNIT_ORDER) -> NonlinearitySpec:
    return NonlinearitySpec(p=p, interval=UNIT, order=order)


def line_spec(
    p: float,
    radius: float = DEFAULT_RADIUS,
    order: int = DEFAULT_PANEL_ORDER,
    panel_width: float = DEFAULT_PANEL_WIDTH,
    tail_rtol: Optional[float] = None,
) -> NonlinearitySpec:
    return NonlinearitySpec(p=p, interval=LINE, order=order, radius=radius,
                            panel_width=panel_width, tail_rtol=tail_rtol)


# Full (nodes x n) phase tables are cached for rules small enough to keep
# around (the ground-state solver hits the same rule thousands of times).
_TABLE_CACHE: dict[tuple, np.ndarray] = {}
_TABLE_LOCK = threading.Lock()
_TABLE_MAX_ELEMS = 2_000_000
_TABLE_MAX_ENTRIES = 8


def _phase_table(grid: Grid1D, rule: QuadratureRule, key: Optional[tuple]) -> Optional[np.ndarray]:
    if key is None or rule.nodes.size * grid.n > _TABLE_MAX_ELEMS:
        return None
    full_key = (grid.n, grid.length) + key
    with _TABLE_LOCK:
        table = _TABLE_CACHE.get(full_key)
    if table is None:
        table = np.exp(-1j * np.outer(rule.nodes, grid.k2))
        with _TABLE_LOCK:
            if len(_TABLE_CACHE) >= _TABLE_MAX_ENTRIES:
                _TABLE_CACHE.clear()
            _TABLE_CACHE[full_key] = table
    return table


def _rule_key(spec: NonlinearitySpec, radius: float) -> tuple:
    return (spec.interval, spec.order, radius, spec.panel_width)


def _amp_power(a: np.ndarray, expo: float) -> np.ndarray:
    """|g|^expo via exp(expo*log|g|), zero below the denormal floor."""
    out = np.zeros_like(a)
    m = a > _AMPLITUDE_FLOOR
    out[m] = np.exp(expo * np.log(a[m]))
    return out


def _check_amplitude(a_max: float, where: str) -> None:
    if not np.isfinite(a_max) or a_max > AMPLITUDE_OVERFLOW:
        raise OverflowBlowupError(f"{where}: amplitude {a_max:.3e} exceeds overflow guard")


def _nl_hat(f_hat: np.ndarray, grid: Grid1D, rule: QuadratureRule, p: float,
            cache_key: Optional[tuple] = None) -> np.ndarray:
    """Fourier coefficients of the averaged nonlinearity, fixed-order reduction."""
    table = _phase_table(grid, rule, cache_key)
    nodes, weights = rule.nodes, rule.weights
    acc = np.zeros(grid.n, dtype=np.complex128)
    for start in range(0, nodes.size, _NODE_CHUNK):
        stop = min(start + _NODE_CHUNK, nodes.size)
        if table is not None:
            phases = table[start:stop]
        else:
            phases = np.exp(-1j * np.outer(nodes[start:stop], grid.k2))
        g = np.fft.ifft(phases * f_hat[None, :], axis=1)
        a = np.abs(g)
        _check_amplitude(float(a.max(initial=0.0)), "averaged_nonlinearity")
        nl = _amp_power(a, p - 1.0) * g
        acc += np.einsum("m,mj->j", weights[start:stop],
                         np.conj(phases) * np.fft.fft(nl, axis=1))
    return acc


def _strichartz_nodes(f_hat: np.ndarray, grid: Grid1D, nodes: np.ndarray,
                      weights: np.ndarray, p: float,
                      table: Optional[np.ndarray] = None) -> float:
    total = 0.0
    for start in range(0, nodes.size, _NODE_CHUNK):
        stop = min(start + _NODE_CHUNK, nodes.size)
        if table is not None:
            phases = table[start:stop]
        else:
            phases = np.exp(-1j * np.outer(nodes[start:stop], grid.k2))
        g = np.fft.ifft(phases * f_hat[None, :], axis=1)
        a = np.abs(g)
        _check_amplitude(float(a.max(initial=0.0)), "strichartz_integral")
        norms = grid.dx * np.sum(_amp_power(a, p + 1.0), axis=1)
        total += float(np.dot(weights[start:stop], norms))
    return total


def _strichartz_value(f_hat: np.ndarray, grid: Grid1D, rule: QuadratureRule, p: float,
                      cache_key: Optional[tuple] = None) -> float:
    table = _phase_table(grid, rule, cache_key)
    return _strichartz_nodes(f_hat, grid, rule.nodes, rule.weights, p, table)


def effective_radius(f: Field, spec: NonlinearitySpec) -> float:
    """Truncation radius after tail-driven extension (the input radius if none)."""
    if spec.interval != LINE or spec.tail_rtol is None:
        return spec.radius
    _require_valid(f)
    f_hat = f.fourier()
    grid = f.grid
    xs, ws = np.polynomial.legendre.leggauss(spec.order)
    radius = spec.radius
    base = gauss_line(radius, spec.order, spec.panel_width)
    total = _strichartz_value(f_hat, grid, base, spec.p, _rule_key(spec, radius))
    while radius < _RADIUS_CAP:
        # contribution of the next symmetric panel pair [R, R+w] and [-R-w, -R]
        half = 0.5 * spec.panel_width
        mid = radius + half
        nodes = np.concatenate([-(mid + half * xs)[::-1], mid + half * xs])
        weights = np.concatenate([(half * ws)[::-1], half * ws])
        contrib = _strichartz_nodes(f_hat, grid, nodes, weights, spec.p)
        radius += spec.panel_width
        total += contrib
        if contrib <= spec.tail_rtol * max(total, 1e-300):
            break
    return radius


def _require_valid(f: Field) -> None:
    if not np.all(np.isfinite(f.values.view(np.float64))):
        raise FieldError("input field contains NaN/Inf")


def averaged_nonlinearity(f: Field, spec: NonlinearitySpec) -> Field:
    """Quadrature of exp(-i r d_xx)(|exp(i r d_xx) f|^(p-1) exp(i r d_xx) f) over the r-interval."""
    _require_valid(f)
    radius = effective_radius(f, spec)
    rule = spec.rule(radius)
    out_hat = _nl_hat(f.fourier(), f.grid, rule, spec.p, _rule_key(spec, radius))
    if f.space == FOURIER:
        return Field(f.grid, out_hat, FOURIER)
    return Field(f.grid, np.fft.ifft(out_hat), "physical")


def strichartz_integral(f: Field, spec: NonlinearitySpec) -> float:
    """Quadrature of ||exp(i r d_xx) f||_{L^{p+1}}^{p+1} over the r-interval."""
    _require_valid(f)
    radius = effective_radius(f, spec)
    rule = spec.rule(radius)
    return _strichartz_value(f.fourier(), f.grid, rule, spec.p, _rule_key(spec, radius))


def strichartz_refinement(f: Field, spec: NonlinearitySpec, radii) -> list[tuple[float, float]]:
    """Line integral evaluated at each truncation radius, for tail monitoring."""
    if spec.interval != LINE:
        raise QuadratureError("refinement scan applies to the line interval only")
    _require_valid(f)
    f_hat = f.fourier()
    out = []
    for radius in radii:
        rule = spec.rule(float(radius))
        out.append((float(radius), _strichartz_value(f_hat, f.grid, rule, spec.p,
                                                     _rule_key(spec, float(radius)))))
    return out


def energy(f: Field, p: float, order: int = DEFAULT_UNIT_ORDER) -> float:
    """E(f) = 1/2 ||f'||^2 - S_[0,1](f) / (p+1)."""
    return 0.5 * grad_norm_sq(f) - strichartz_integral(f, unit_spec(p, order)) / (p + 1.0)


def energy_infinity(f: Field, p: float, radius: float = DEFAULT_RADIUS,
                    order: int = DEFAULT_PANEL_ORDER,
                    panel_width: float = DEFAULT_PANEL_WIDTH,
                    tail_rtol: Optional[float] = None) -> float:
    """E_inf(f) = 1/2 ||f'||^2 - S_[-R,R](f) / (p+1)."""
    if radius <= 0:
        raise QuadratureError(f"truncation radius must be positive, got {radius}")
    spec = line_spec(p, radius=radius, order=order, panel_width=panel_width, tail_rtol=tail_rtol)
    return 0.5 * grad_norm_sq(f) - strichartz_integral(f, spec) / (p + 1.0)


def weinstein(f: Field, spec: NonlinearitySpec) -> float:
    """W(f) = S(f) / (||f||^{(p+7)/2} ||f'||^{(p-5)/2}); needs f != 0 with f' != 0."""
    m = mass(f)
    g2 = grad_norm_sq(f)
    if m <= 0.0 or g2 <= 0.0:
        raise FieldError("weinstein: field must have positive mass and gradient norm")
    s = strichartz_integral(f, spec)
    p = spec.p
    return s / (m ** ((p + 7.0) / 4.0) * g2 ** ((p - 5.0) / 4.0))
