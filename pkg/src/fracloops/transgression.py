"""The transgressed 1-form on loop space, its kernel and multiplier
representations, and the canonical presymplectic form.

Reference sign convention: Theta(gamma)[h] = <J gamma', h>_{L^2} for smooth
loops.  All representation constants are estimated and reported relative to
this pairing, never hard-coded.

The kernel route exists in two flavors.  With ``hilbert_pairing=False`` it
is the plain difference kernel

    (2pi/N)^2 sum_{j!=j'} <gamma_j - gamma_j', J (h_j - h_j')> k(t_j - t_j'),

which vanishes when h = gamma, is antisymmetric under swapping the
arguments, and obeys an exact Hoelder bound.  Being built from the
*symmetric* polarization of the Gagliardo form it is not proportional to
the duality pairing; the proportional representation requires the Hilbert
transform on the second argument (``hilbert_pairing=True``), and at
s = 1/2, p = 2 the ratio to the duality route is the universal constant
-2*pi (per unit of this package's Fourier conventions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .spectral import (
    TWO_PI,
    Grid,
    GridMismatchError,
    LoopSample,
    derivative,
    derivative_multiplier,
    fractional_power,
    hilbert,
)
from .sobolev import (
    SobolevParams,
    bessel_norm,
    duality_pair,
    gagliardo_seminorm,
    holder_conjugate_factor,
    weighted_difference_sum,
    _kernel_values,
)

__all__ = [
    "TwoFormField",
    "ThetaEvaluation",
    "theta_duality",
    "theta_multiplier",
    "theta_kernel",
    "theta_lambda",
    "transgressed_two_form",
    "presymplectic",
    "presymplectic_kernel_dimension",
    "evaluate_theta",
    "kernel_bound_factors",
]

ROTATION_J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass
class TwoFormField:
    """A constant skew matrix J0 or a Lipschitz field of skew matrices B(x)."""

    kind: str                      # "constant_J" | "variable_B"
    J0: Optional[np.ndarray] = None
    B: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind == "constant_J":
            if self.J0 is None:
                raise ValueError("constant_J requires J0")
            J = np.asarray(self.J0, dtype=float)
            if J.ndim != 2 or J.shape[0] != J.shape[1]:
                raise ValueError("J0 must be square")
            if np.max(np.abs(J + J.T)) > 1e-12 * (1 + np.max(np.abs(J))):
                raise ValueError("J0 must be skew-symmetric")
            self.J0 = J
        elif self.kind == "variable_B":
            if self.B is None:
                raise ValueError("variable_B requires the matrix field B")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")

    @property
    def dim(self) -> Optional[int]:
        return None if self.J0 is None else self.J0.shape[0]

    def at(self, values: np.ndarray) -> np.ndarray:
        """Matrix field sampled along the loop, shape (N, m, m); skewness checked."""
        if self.kind == "constant_J":
            return np.broadcast_to(self.J0, (values.shape[0],) + self.J0.shape)
        B = np.asarray(self.B(values), dtype=float)
        if np.max(np.abs(B + np.swapaxes(B, 1, 2))) > 1e-12 * (1 + np.max(np.abs(B))):
            raise ValueError("B(x) must be skew-symmetric at every sampled point")
        return B


def standard_form(m: int = 2) -> TwoFormField:
    """dx ^ dy and its higher-dimensional block analogue."""
    if m % 2 != 0:
        raise ValueError("the standard form needs an even number of components")
    J = np.kron(np.eye(m // 2), ROTATION_J)
    return TwoFormField(kind="constant_J", J0=J)


@dataclass
class ThetaEvaluation:
    duality_value: float
    multiplier_value: float
    kernel_value: float
    params: SobolevParams
    kernel_to_duality: float
    multiplier_to_duality: float


def _j_gamma_prime(gamma: LoopSample, form: TwoFormField) -> LoopSample:
    dg = derivative(gamma)
    Jn = form.at(gamma.values)
    return LoopSample(gamma.grid, np.einsum("nij,nj->ni", Jn, dg.values))


def theta_duality(gamma: LoopSample, h: LoopSample, form: TwoFormField,
                  sp: Optional[SobolevParams] = None) -> float:
    """Theta(gamma)[h] = <J(gamma) d_t gamma, h> via the grid duality pairing."""
    gamma.same_layout(h)
    if form.dim is not None and form.dim != gamma.components:
        raise GridMismatchError("form dimension does not match loop components")
    return duality_pair(_j_gamma_prime(gamma, form), h)


def theta_multiplier(gamma: LoopSample, h: LoopSample, form: TwoFormField,
                     sp: SobolevParams) -> float:
    """Fractional-split route int <|D|^s gamma, J^T H |D|^{1-s} h> dt.

    The total symbol is i k, so this equals :func:`theta_duality` exactly
    (constant c = 1); it exercises the multiplier calculus instead of the
    physical-space derivative.  Constant forms only: a variable B(gamma)
    does not commute with Fourier multipliers.
    """
    if form.kind != "constant_J":
        raise ValueError("theta_multiplier supports constant forms only: "
                         "a variable coefficient does not commute with |D|^s")
    gamma.same_layout(h)
    X = fractional_power(gamma, sp.s)
    Y = hilbert(fractional_power(h, 1.0 - sp.s))
    Z = Y.values @ form.J0          # rows (J^T y)^T = y^T J
    return float(TWO_PI / gamma.grid.n_points * np.sum(X.values * Z))


def theta_kernel(gamma: LoopSample, h: LoopSample, form: TwoFormField,
                 sp: SobolevParams, kernel: str = "chordal",
                 hilbert_pairing: bool = False) -> float:
    """Singular difference-kernel route with exponent 1 + s*p.

    ``hilbert_pairing=True`` replaces h by its Hilbert transform inside the
    differences, giving the representation proportional to the duality
    route (ratio -2*pi at s=1/2, p=2).
    """
    gamma.same_layout(h)
    n = gamma.grid.n_points
    g = gamma.values
    hv = hilbert(h).values if hilbert_pairing else h.values
    if form.kind == "constant_J":
        hv = hv @ form.J0.T
        Jpoint = None
    else:
        Jpoint = form.at(gamma.values)
    kv = _kernel_values(n, sp.kernel_exponent, kernel)
    idx = (np.arange(n)[None, :] + np.arange(1, n)[:, None]) % n
    gd = g[idx] - g[None, :, :]
    hd = hv[idx] - hv[None, :, :]
    if Jpoint is None:
        inner = np.sum(gd * hd, axis=2)
    else:
        # variable form evaluated at the first argument point t_j
        hd = np.einsum("nij,dnj->dni", Jpoint, hd)
        inner = np.sum(gd * hd, axis=2)
    return float(kv @ np.sum(inner, axis=1)) * (TWO_PI / n) ** 2


def kernel_bound_factors(gamma: LoopSample, h: LoopSample, sp: SobolevParams,
                         kernel: str = "chordal") -> tuple:
    """Hoelder factors of the kernel bound: [gamma]_{W^{s,p}} and the
    conjugate factor with the same kernel exponent."""
    return (gagliardo_seminorm(gamma, sp, kernel),
            holder_conjugate_factor(h, sp, kernel))


def theta_lambda(gamma: LoopSample, h: LoopSample,
                 form: Optional[TwoFormField] = None) -> float:
    """Primitive route for the standard area form: lambda = (x dy - y dx)/2,

    Theta_lambda(gamma)[h] = int lambda(gamma)[h] dt = (1/2) int <J gamma, h> dt.

    Linear in gamma, so d Theta_lambda(h, k) = Theta_lambda(h)[k] -
    Theta_lambda(k)[h] = int omega0(h, k) dt, the transgressed 2-form.
    """
    form = standard_form(gamma.components) if form is None else form
    gamma.same_layout(h)
    Jg = np.einsum("nij,nj->ni", form.at(gamma.values), gamma.values)
    return float(0.5 * TWO_PI / gamma.grid.n_points * np.sum(Jg * h.values))


def transgressed_two_form(h: LoopSample, k: LoopSample,
                          form: Optional[TwoFormField] = None) -> float:
    """int omega0(h(t), k(t)) dt = int <J h, k> dt for the constant form."""
    form = standard_form(h.components) if form is None else form
    h.same_layout(k)
    Jh = np.einsum("nij,nj->ni", form.at(h.values), h.values)
    return float(TWO_PI / h.grid.n_points * np.sum(Jh * k.values))


def presymplectic(h: LoopSample, k: LoopSample,
                  form: Optional[TwoFormField] = None) -> float:
    """Canonical presymplectic form d Theta_0 (h, k) = <d_t h, k> - <d_t k, h>.

    Independent of any base loop; the optional form argument is accepted for
    signature compatibility but plays no role in the canonical value (the
    d of a gamma-linear 1-form with one total derivative vanishes for skew
    coefficients, so only the J-free primitive contributes).
    """
    h.same_layout(k)
    return duality_pair(derivative(h), k) - duality_pair(derivative(k), h)


def presymplectic_kernel_dimension(grid: Grid, m: int) -> int:
    """Null-space dimension of h -> presymplectic(h, .) by spectral inspection.

    The form is mode-diagonal with symbol 2ik.  Inspection runs over the
    unambiguous frequencies |k| < N/2 (odd symbols cannot represent the
    Nyquist mode, which is excluded from the discrete loop space here); the
    symbol vanishes at k = 0 only, giving the m constant directions.
    """
    sig = derivative_multiplier().on_grid(grid)
    half = grid.n_points // 2
    freqs = grid.frequencies
    unambiguous = np.abs(freqs) < half
    zero_modes = int(np.sum(np.abs(sig[unambiguous]) == 0.0))
    return zero_modes * m


def evaluate_theta(gamma: LoopSample, h: LoopSample, form: TwoFormField,
                   sp: SobolevParams, kernel: str = "chordal") -> ThetaEvaluation:
    """All three routes plus their ratios (kernel route Hilbert-paired so a
    single representation constant exists)."""
    dv = theta_duality(gamma, h, form, sp)
    mv = theta_multiplier(gamma, h, form, sp)
    kv = theta_kernel(gamma, h, form, sp, kernel, hilbert_pairing=True)
    tiny = 1e-300
    return ThetaEvaluation(
        duality_value=dv,
        multiplier_value=mv,
        kernel_value=kv,
        params=sp,
        kernel_to_duality=kv / (dv if abs(dv) > tiny else np.sign(dv or 1) * tiny),
        multiplier_to_duality=mv / (dv if abs(dv) > tiny else np.sign(dv or 1) * tiny),
    )
