"""Extremizer profile Q, sharp-constant estimate, and dichotomy thresholds.

The profile solves the fixed-point equation

    -Q'' + Q = N_R[Q],     N_R[Q] = int_{-R}^{R} exp(-i r d_xx)(|exp(i r d_xx) Q|^(p-1) ...) dr,

computed here by a Petviashvili iteration.  The converged profile yields an
estimate of the sharp constant of the space-time interpolation inequality as
the Weinstein quotient W(Q), which is bracketed by closed-form bounds:

    lower = 2^((p-7)/4) * pi^(-(p-1)/4) * (p+1)^(-1/2) * B(1/2, (p-3)/4),
    upper = 1 / (2 sqrt(3)),

the lower bound being the Gaussian trial value.  Exact consequences of the
fixed-point equation pin the norm ratios

    ||Q'||^2 / ||Q||^2        = (p-5)/(p+7),
    S_R(Q) / ||Q||^2          = 2(p+1)/(p+7),
    ||Q||^2                   = [2(p+1)(p-5) / ((p+7)^2 C_p)]^(2/(p-1)) * ((p+7)/(p-5))^(1/2),

which the artifact verifies rather than assumes.  For p > 9 the dichotomy
thresholds follow from C_p alone:

    ||Q'|| ||Q||^alpha        = [2(p+1) / ((p-5) C_p)]^(2/(p-9)),   alpha = (p+7)/(p-9),
    E_inf(Q) M(Q)^alpha       = (p-9)/(2(p-5)) * (||Q'|| ||Q||^alpha)^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
from scipy import special

from .errors import ConvergenceError, FieldError
from .nonlinearity import (DEFAULT_PANEL_ORDER, DEFAULT_PANEL_WIDTH, DEFAULT_RADIUS,
                           _nl_hat, _rule_key, line_spec)
from .spectral import Field, PHYSICAL, make_grid, read_snapshot, write_snapshot

UPPER_BOUND = 1.0 / (2.0 * np.sqrt(3.0))

_BRACKET_SLACK = 1e-6


def analytic_bounds(p: float) -> tuple[float, float]:
    """Closed-form lower/upper bracket for the sharp constant; needs p > 5."""
    if p <= 5:
        raise ValueError(f"analytic bounds require p > 5, got {p}")
    lower = (2.0 ** ((p - 7.0) / 4.0)
             * np.pi ** (-(p - 1.0) / 4.0)
             * (p + 1.0) ** -0.5
             * special.beta(0.5, (p - 3.0) / 4.0))
    return float(lower), float(UPPER_BOUND)


@dataclass
class SolverConfig:
    """Grid, truncation, and stopping parameters for the profile solve."""

    n: int = 1024
    length: float = 32.0 * np.pi
    radius: float = DEFAULT_RADIUS
    order: int = DEFAULT_PANEL_ORDER
    panel_width: float = DEFAULT_PANEL_WIDTH
    update_tol: float = 1e-10
    residual_tol: float = 1e-6
    max_iterations: int = 2000
    seed_width: float = 1.0


@dataclass
class GroundState:
    """Converged profile with its constant estimate, norms, and residuals."""

    p: float
    c_p_estimate: float
    mass_q: float
    grad_sq_q: float
    strichartz_q: float
    el_residual: float
    el_residual_rel: float
    iterations: int
    radius: float
    order: int
    profile: Optional[Field] = None

    def summary(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "profile"}
        if self.profile is not None:
            out["grid"] = {"n": self.profile.grid.n, "length": self.profile.grid.length}
        return out


def _even_index(n: int) -> np.ndarray:
    # j -> (n - j) mod n maps x to -x for samples centered at index n/2
    idx = np.arange(n)
    return (n - idx) % n


def petviashvili_solve(p: float, config: SolverConfig = SolverConfig()) -> GroundState:
    """Solve -Q'' + Q = N_R[Q] by the stabilized fixed-point iteration.

    Update rule:

        Q_{m+1} = S_m^gamma * (1 - d_xx)^(-1) N_R[Q_m],
        S_m     = <(1 - d_xx) Q_m, Q_m> / <N_R[Q_m], Q_m>,
        gamma   = p / (p - 1),

    with the iterate symmetrized to a real even profile each step.  Stops when
    the relative L2 update falls below `update_tol` and the relative residual
    of the fixed-point equation is below `residual_tol`.  The result is
    rejected if the constant estimate leaves the analytic bracket.
    """
    if p < 9:
        raise ValueError(f"profile solve requires p >= 9, got {p}")
    grid = make_grid(config.n, config.length)
    spec = line_spec(p, radius=config.radius, order=config.order, panel_width=config.panel_width)
    rule = spec.rule()
    cache_key = _rule_key(spec, spec.radius)
    k2 = grid.k2
    w_l2 = grid.dx / grid.n  # Parseval factor for sums over Fourier coefficients
    rev = _even_index(grid.n)

    q = np.exp(-grid.x ** 2 / (2.0 * config.seed_width ** 2)).astype(np.complex128)
    q_hat = np.fft.fft(q)
    gamma = p / (p - 1.0)

    delta = np.inf
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        nl_hat = _nl_hat(q_hat, grid, rule, p, cache_key)
        num = float(w_l2 * np.sum((1.0 + k2) * np.abs(q_hat) ** 2))
        den = float(w_l2 * np.real(np.sum(nl_hat * np.conj(q_hat))))
        if not np.isfinite(den) or den <= 0.0:
            raise ConvergenceError(
                f"p={p}: stabilizing factor collapsed at iteration {iterations} (pairing {den:.3e})")
        s_factor = num / den
        if not np.isfinite(s_factor) or s_factor > 1e12:
            raise ConvergenceError(f"p={p}: stabilizing factor diverged ({s_factor:.3e})")
        new_hat = s_factor ** gamma * nl_hat / (1.0 + k2)
        # keep the iterate real and even to suppress phase/translation drift
        new = np.fft.ifft(new_hat).real
        new = 0.5 * (new + new[rev])
        new_hat = np.fft.fft(new.astype(np.complex128))

        diff = float(np.sqrt(w_l2 * np.sum(np.abs(new_hat - q_hat) ** 2)))
        norm = float(np.sqrt(w_l2 * np.sum(np.abs(q_hat) ** 2)))
        delta = diff / max(norm, 1e-300)
        q_hat = new_hat
        if delta < config.update_tol:
            break
    else:
        raise ConvergenceError(
            f"p={p}: no convergence in {config.max_iterations} iterations (last update {delta:.3e})")

    nl_hat = _nl_hat(q_hat, grid, rule, p, cache_key)
    mass_q = float(w_l2 * np.sum(np.abs(q_hat) ** 2))
    grad_sq_q = float(w_l2 * np.sum(k2 * np.abs(q_hat) ** 2))
    strichartz_q = float(w_l2 * np.real(np.sum(nl_hat * np.conj(q_hat))))
    defect = (1.0 + k2) * q_hat - nl_hat
    el_residual = float(np.sqrt(w_l2 * np.sum(np.abs(defect) ** 2)))
    el_residual_rel = el_residual / np.sqrt(mass_q)
    if el_residual_rel > config.residual_tol:
        raise ConvergenceError(
            f"p={p}: converged update but residual {el_residual_rel:.3e} above {config.residual_tol:.1e}")

    c_p = strichartz_q / (mass_q ** ((p + 7.0) / 4.0) * grad_sq_q ** ((p - 5.0) / 4.0))
    lower, upper = analytic_bounds(p)
    if not (lower * (1.0 - _BRACKET_SLACK) <= c_p <= upper * (1.0 + _BRACKET_SLACK)):
        raise ConvergenceError(
            f"p={p}: constant estimate {c_p:.8f} outside analytic bracket [{lower:.8f}, {upper:.8f}]")

    profile = Field(grid, np.fft.ifft(q_hat), PHYSICAL)
    return GroundState(p=p, c_p_estimate=float(c_p), mass_q=mass_q, grad_sq_q=grad_sq_q,
                       strichartz_q=strichartz_q, el_residual=el_residual,
                       el_residual_rel=el_residual_rel, iterations=iterations,
                       radius=config.radius, order=config.order, profile=profile)


@dataclass
class NormIdentityReport:
    """Relative defects of the three exact norm relations."""

    residual_mass: float
    residual_grad: float
    residual_strichartz: float

    def max_residual(self) -> float:
        return max(self.residual_mass, self.residual_grad, self.residual_strichartz)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def verify_norm_identities(gs: GroundState) -> NormIdentityReport:
    """Check the stored norms against their closed forms in p and the constant estimate."""
    p, c = gs.p, gs.c_p_estimate
    mass_pred = ((2.0 * (p + 1.0) * (p - 5.0) / ((p + 7.0) ** 2 * c)) ** (2.0 / (p - 1.0))
                 * ((p + 7.0) / (p - 5.0)) ** 0.5)
    grad_pred = (p - 5.0) / (p + 7.0) * gs.mass_q
    strichartz_pred = 2.0 * (p + 1.0) / (p + 7.0) * gs.mass_q
    return NormIdentityReport(
        residual_mass=_rel(gs.mass_q, mass_pred),
        residual_grad=_rel(gs.grad_sq_q, grad_pred),
        residual_strichartz=_rel(gs.strichartz_q, strichartz_pred),
    )


@dataclass
class Thresholds:
    """Dichotomy constants for p > 9, derived from the sharp-constant estimate."""

    p: float
    alpha: float
    grad_mass_threshold: float
    energy_mass_threshold: float
    grad_cross_rel: float     # vs. sqrt(grad_sq_q) * mass_q^(alpha/2)
    energy_cross_rel: float   # vs. the same route through the Q norms


def thresholds_from_constant(p: float, c_p: float) -> tuple[float, float]:
    """(gradient-mass, energy-mass) threshold pair as functions of p and C_p."""
    if p <= 9:
        raise ValueError(f"thresholds require p > 9, got {p}")
    if c_p <= 0:
        raise ValueError(f"constant must be positive, got {c_p}")
    grad_mass = (2.0 * (p + 1.0) / ((p - 5.0) * c_p)) ** (2.0 / (p - 9.0))
    energy_mass = (p - 9.0) / (2.0 * (p - 5.0)) * grad_mass ** 2
    return float(grad_mass), float(energy_mass)


def dichotomy_thresholds(p: float, gs: GroundState) -> Thresholds:
    """Thresholds from the constant estimate, cross-checked against the Q norms."""
    if p == 9:
        raise ValueError("alpha is undefined at p = 9; use the mass-critical classifier")
    if p < 9:
        raise ValueError(f"thresholds require p > 9, got {p}")
    if gs.p != p:
        raise ValueError(f"ground state was solved at p={gs.p}, requested p={p}")
    alpha = (p + 7.0) / (p - 9.0)
    grad_mass, energy_mass = thresholds_from_constant(p, gs.c_p_estimate)
    grad_mass_norms = np.sqrt(gs.grad_sq_q) * gs.mass_q ** (alpha / 2.0)
    energy_mass_norms = (p - 9.0) / (2.0 * (p - 5.0)) * gs.grad_sq_q * gs.mass_q ** alpha
    return Thresholds(
        p=p,
        alpha=float(alpha),
        grad_mass_threshold=grad_mass,
        energy_mass_threshold=energy_mass,
        grad_cross_rel=_rel(grad_mass_norms, grad_mass),
        energy_cross_rel=_rel(energy_mass_norms, energy_mass),
    )


def save_ground_state(gs: GroundState, json_path, snapshot_path) -> None:
    """JSON metadata next to the binary snapshot of the profile."""
    if gs.profile is None:
        raise FieldError("ground state has no profile to save")
    write_snapshot(snapshot_path, gs.profile, 0.0)
    record = gs.summary()
    record["snapshot"] = str(snapshot_path)
    with open(json_path, "w") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")


def load_ground_state(json_path) -> GroundState:
    with open(json_path) as fh:
        record = json.load(fh)
    profile, _ = read_snapshot(record["snapshot"])
    return GroundState(
        p=record["p"], c_p_estimate=record["c_p_estimate"], mass_q=record["mass_q"],
        grad_sq_q=record["grad_sq_q"], strichartz_q=record["strichartz_q"],
        el_residual=record["el_residual"], el_residual_rel=record["el_residual_rel"],
        iterations=record["iterations"], radius=record["radius"], order=record["order"],
        profile=profile,
    )
