"""Admissible functionals, hydrodynamic-type Poisson operators, bracket
evaluation, Jacobi residuals, and the degree-<=2 bicomplex checks.

Operator kinds:

* ``local``            J * d_t with J a constant matrix or a pointwise field
                       J(gamma); variable coefficients use the skew-split
                       discretization (J d_t xi + d_t(J xi))/2, which is
                       exactly skew-adjoint on the grid for pointwise
                       symmetric J because the spectral differentiation
                       matrix is antisymmetric.
* ``order0``           pointwise multiplication by a constant matrix
                       (skew-adjoint for skew J0; the Darboux/NLS case).
* ``weakly_nonlocal``  local part plus sum_r A_r(gamma) invdt(B_r(gamma)^T xi);
                       with A_r = B_r each tail term is exactly skew-adjoint.
* ``dn``               g(gamma) d_t + (b : gamma_t), the hydrodynamic form
                       kept verbatim; skewness then requires b + b^T = dg.
* ``explicit``         arbitrary user map (gamma, xi) -> loop.

Skew-adjointness of J(gamma) d_t requires pointwise *symmetric* J (g is a
metric in the hydrodynamic setting); a constant skew J makes J d_t
self-adjoint instead.  Coefficients are not forced to either class here --
the verification suites choose them appropriately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .spectral import (
    TWO_PI,
    Grid,
    LoopSample,
    derivative,
    dft,
    inv_dt,
)
from .sobolev import LipschitzMap, duality_pair

__all__ = [
    "Functional",
    "PoissonOperator",
    "JacobiReport",
    "eval_functional",
    "variational_derivative",
    "gradient_check",
    "apply_operator",
    "bracket",
    "jacobi_residual",
    "dv_squared_check",
    "dh_exactness_check",
    "make_cylindrical",
]

MatrixField = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], LipschitzMap]


@dataclass
class Functional:
    """F(gamma) = int f(gamma, d_t gamma, ...) dt with pointwise density.

    ``partials`` holds d f / d u^{(i)} for i = 0..order; the variational
    derivative is the Euler-Lagrange combination
    sum_i (-d_t)^i partials[i].  ``hessian`` (order-0 densities only) is the
    pointwise Hessian used by analytic Jacobi chaining and the bicomplex
    check.  ``value_fn``/``gradient_fn`` override the density machinery for
    functionals that are not integrals of pointwise densities (cylindrical
    functionals of finitely many Fourier modes).
    """

    name: str
    density: Optional[Callable] = None
    partials: Optional[Sequence[Callable]] = None
    order: int = 0
    hessian: Optional[Callable] = None
    value_fn: Optional[Callable[[np.ndarray], float]] = None
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.density is None and self.value_fn is None:
            raise ValueError("a density or a value_fn is required")
        if self.partials is not None and len(self.partials) != self.order + 1:
            raise ValueError("need one partial per derivative slot (order + 1)")


def _density_args(F: Functional, gamma: LoopSample):
    args = [gamma.values]
    for i in range(1, F.order + 1):
        args.append(derivative(gamma, order=i).values)
    return args


def eval_functional(F: Functional, gamma: LoopSample) -> float:
    """Trapezoid value (2 pi / N) sum_j f(...)(t_j)."""
    if F.value_fn is not None:
        return float(F.value_fn(gamma.values))
    dens = np.asarray(F.density(*_density_args(F, gamma)), dtype=float)
    return float(TWO_PI / gamma.grid.n_points * np.sum(dens))


def _fd_gradient(F: Functional, gamma: LoopSample, eps: float) -> np.ndarray:
    n, m = gamma.values.shape
    w = TWO_PI / n
    out = np.zeros((n, m))
    base = gamma.values
    for j in range(n):
        for c in range(m):
            vp = base.copy(); vp[j, c] += eps
            vm = base.copy(); vm[j, c] -= eps
            fp = eval_functional(F, LoopSample(gamma.grid, vp))
            fm = eval_functional(F, LoopSample(gamma.grid, vm))
            out[j, c] = (fp - fm) / (2 * eps * w)
    return out


def variational_derivative(F: Functional, gamma: LoopSample,
                           fd_eps: float = 1e-6) -> LoopSample:
    """delta F as a loop: pointwise gradient for order-0 densities,
    Euler-Lagrange with spectral derivatives for differential densities,
    central finite differences of the evaluated functional as fallback."""
    if F.gradient_fn is not None:
        return LoopSample(gamma.grid, np.asarray(F.gradient_fn(gamma.values), dtype=float))
    if F.partials is None:
        if F.density is None:
            raise ValueError(f"functional {F.name!r} has neither gradient nor density")
        return LoopSample(gamma.grid, _fd_gradient(F, gamma, fd_eps))
    args = _density_args(F, gamma)
    n, m = gamma.values.shape
    total = np.zeros((n, m))
    for i, part in enumerate(F.partials):
        term = np.asarray(part(*args), dtype=float)
        if term.ndim == 1:
            term = term[:, None]
        if i > 0:
            term = derivative(LoopSample(gamma.grid, term), order=i).values
        total += (-1.0) ** i * term
    return LoopSample(gamma.grid, total)


def gradient_check(F: Functional, gamma: LoopSample, h: LoopSample,
                   eps: float = 1e-6) -> tuple:
    """(directional finite difference, <delta F, h>) for the gradient contract."""
    vp = LoopSample(gamma.grid, gamma.values + eps * h.values)
    vm = LoopSample(gamma.grid, gamma.values - eps * h.values)
    fd = (eval_functional(F, vp) - eval_functional(F, vm)) / (2 * eps)
    pairing = duality_pair(variational_derivative(F, gamma), h)
    return fd, pairing


# ---------------------------------------------------------------------------
# Operators.
# ---------------------------------------------------------------------------

def _coefficient(c: MatrixField) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(c, LipschitzMap):
        return lambda v: np.asarray(c.apply(v), dtype=float)
    if callable(c):
        return lambda v: np.asarray(c(v), dtype=float)
    arr = np.asarray(c, dtype=float)
    return lambda v: np.broadcast_to(arr, (v.shape[0],) + arr.shape)


@dataclass
class PoissonOperator:
    kind: str
    J: Optional[MatrixField] = None
    nonlocal_terms: Sequence[tuple] = field(default_factory=tuple)
    g: Optional[MatrixField] = None
    b: Optional[MatrixField] = None
    explicit_apply: Optional[Callable[[LoopSample, LoopSample], LoopSample]] = None
    name: str = ""

    def __post_init__(self):
        kinds = ("local", "order0", "weakly_nonlocal", "dn", "explicit")
        if self.kind not in kinds:
            raise ValueError(f"kind must be one of {kinds}")
        if self.kind == "explicit" and self.explicit_apply is None:
            raise ValueError("explicit operators need explicit_apply")
        if self.kind == "dn" and self.g is None:
            raise ValueError("dn operators need the metric coefficient g")
        if self.kind in ("local", "order0") and self.J is None:
            raise ValueError(f"{self.kind} operators need J")

    @property
    def gamma_independent(self) -> bool:
        """True when the operator does not depend on the base loop, so the
        analytic Jacobi chain rule applies."""
        if self.kind == "explicit":
            return False
        if self.kind == "dn":
            return False
        const = lambda c: c is None or isinstance(c, np.ndarray)
        if not const(self.J):
            return False
        return all(const(a) and const(b) for a, b in self.nonlocal_terms)


def _apply_local(Jfield: MatrixField, gamma: LoopSample, xi: LoopSample) -> np.ndarray:
    dxi = derivative(xi).values
    if isinstance(Jfield, np.ndarray):
        return dxi @ Jfield.T
    Jn = _coefficient(Jfield)(gamma.values)
    a = np.einsum("nij,nj->ni", Jn, dxi)
    b = derivative(LoopSample(gamma.grid,
                              np.einsum("nij,nj->ni", Jn, xi.values))).values
    return 0.5 * (a + b)


def apply_operator(P: PoissonOperator, gamma: LoopSample, xi: LoopSample) -> LoopSample:
    """P(gamma) xi.  Constant xi is legal: the derivative part vanishes and
    nonlocal tails are mean-projected, never an error."""
    gamma.same_layout(xi)
    if P.kind == "explicit":
        return P.explicit_apply(gamma, xi)
    if P.kind == "order0":
        J0 = np.asarray(P.J, dtype=float)
        return LoopSample(gamma.grid, xi.values @ J0.T)
    if P.kind == "dn":
        gn = _coefficient(P.g)(gamma.values)
        out = np.einsum("nij,nj->ni", gn, derivative(xi).values)
        if P.b is not None:
            bn = _coefficient(P.b)(gamma.values)
            M = np.einsum("nijk,nk->nij", bn, derivative(gamma).values)
            out = out + np.einsum("nij,nj->ni", M, xi.values)
        return LoopSample(gamma.grid, out)
    # local / weakly_nonlocal
    out = np.zeros_like(xi.values)
    if P.J is not None:
        out = out + _apply_local(P.J, gamma, xi)
    for A, B in P.nonlocal_terms:
        Bn = _coefficient(B)(gamma.values)
        w = np.einsum("nji,nj->ni", Bn, xi.values)      # B^T xi
        w = inv_dt(LoopSample(gamma.grid, w)).values
        An = _coefficient(A)(gamma.values)
        out = out + np.einsum("nij,nj->ni", An, w)
    return LoopSample(gamma.grid, out)


def bracket(F: Functional, G: Functional, P: PoissonOperator,
            gamma: LoopSample) -> float:
    """{F, G}(gamma) = <P(gamma) delta G, delta F>."""
    dG = variational_derivative(G, gamma)
    dF = variational_derivative(F, gamma)
    return duality_pair(apply_operator(P, gamma, dG), dF)


# ---------------------------------------------------------------------------
# Jacobi residual.
# ---------------------------------------------------------------------------

@dataclass
class JacobiReport:
    triples: list
    residual: float
    scale: float
    relative_residual: float
    epsilon_fd: float
    mode: str


def _bracket_scale(F, G, H, P, gamma) -> float:
    funcs = (F, G, H)
    vals = [abs(bracket(X, Y, P, gamma))
            for X in funcs for Y in funcs if X is not Y]
    return max(vals)


def _inner_gradient_chain(G: Functional, H: Functional, P: PoissonOperator,
                          gamma: LoopSample) -> LoopSample:
    # gamma-independent skew-adjoint P: the grid gradient of {G,H} is
    # Hess_g . (P delta H) - Hess_h . (P delta G)
    dG = variational_derivative(G, gamma)
    dH = variational_derivative(H, gamma)
    Hg = np.asarray(G.hessian(gamma.values), dtype=float)
    Hh = np.asarray(H.hessian(gamma.values), dtype=float)
    PdH = apply_operator(P, gamma, dH).values
    PdG = apply_operator(P, gamma, dG).values
    vals = np.einsum("nij,nj->ni", Hg, PdH) - np.einsum("nij,nj->ni", Hh, PdG)
    return LoopSample(gamma.grid, vals)


def _inner_gradient_fd(G: Functional, H: Functional, P: PoissonOperator,
                       gamma: LoopSample, eps: float) -> LoopSample:
    n, m = gamma.values.shape
    w = TWO_PI / n
    out = np.zeros((n, m))
    base = gamma.values
    for j in range(n):
        for c in range(m):
            vp = base.copy(); vp[j, c] += eps
            vm = base.copy(); vm[j, c] -= eps
            bp = bracket(G, H, P, LoopSample(gamma.grid, vp))
            bm = bracket(G, H, P, LoopSample(gamma.grid, vm))
            out[j, c] = (bp - bm) / (2 * eps * w)
    return LoopSample(gamma.grid, out)


def jacobi_residual(F: Functional, G: Functional, H: Functional,
                    P: PoissonOperator, gamma: LoopSample,
                    eps: float = 1e-5, mode: str = "auto") -> JacobiReport:
    """{F,{G,H}} + {G,{H,F}} + {H,{F,G}} with the inner-bracket gradients
    taken analytically (chain rule; gamma-independent operators with C^2
    densities) or by central finite differences along grid directions."""
    if mode == "auto":
        chainable = (P.gamma_independent
                     and all(X.hessian is not None for X in (F, G, H)))
        mode = "chain" if chainable else "fd"
    if mode == "chain" and not P.gamma_independent:
        raise ValueError("analytic chaining requires a gamma-independent operator")
    total = 0.0
    for A, B, C in ((F, G, H), (G, H, F), (H, F, G)):
        if mode == "chain":
            dInner = _inner_gradient_chain(B, C, P, gamma)
        else:
            dInner = _inner_gradient_fd(B, C, P, gamma, eps)
        total += duality_pair(apply_operator(P, gamma, dInner),
                              variational_derivative(A, gamma))
    scale = _bracket_scale(F, G, H, P, gamma)
    return JacobiReport(
        triples=[F.name, G.name, H.name],
        residual=abs(total),
        scale=scale,
        relative_residual=abs(total) / max(scale, 1e-300),
        epsilon_fd=eps if mode == "fd" else 0.0,
        mode=mode,
    )


# ---------------------------------------------------------------------------
# Degree-<=2 bicomplex checks.
# ---------------------------------------------------------------------------

def dv_squared_check(F: Functional, gamma: LoopSample, eps: float = 1e-4) -> float:
    """Asymmetry of the discretized second variation.

    Columns of the Hessian are central finite differences of the variational
    derivative; mixed partials commute iff the returned max-abs asymmetry is
    at the FD noise level.  (Differencing the scalar value twice would be
    symmetric identically and check nothing.)
    """
    n, m = gamma.values.shape
    dim = n * m
    Hmat = np.zeros((dim, dim))
    base = gamma.values
    for j in range(n):
        for c in range(m):
            vp = base.copy(); vp[j, c] += eps
            vm = base.copy(); vm[j, c] -= eps
            gp = variational_derivative(F, LoopSample(gamma.grid, vp)).values
            gm = variational_derivative(F, LoopSample(gamma.grid, vm)).values
            Hmat[j * m + c] = ((gp - gm) / (2 * eps)).ravel()
    return float(np.max(np.abs(Hmat - Hmat.T)))


def dh_exactness_check(density_loop: LoopSample) -> float:
    """| int d_t(density) dt | -- the integral of a horizontal-exact density
    over the circle, zero up to rounding for the spectral derivative."""
    dd = derivative(density_loop)
    return float(abs(TWO_PI / density_loop.grid.n_points * np.sum(dd.values)))


# ---------------------------------------------------------------------------
# Cylindrical functionals.
# ---------------------------------------------------------------------------

def make_cylindrical(name: str, phi: Callable, dphi: Callable, kmax: int,
                     grid: Grid, m: int) -> Functional:
    """phi(Re u_k, Im u_k | 0 <= k <= kmax) as a Functional.

    ``phi`` maps an array of shape (kmax+1, m, 2) (last axis Re/Im) to a
    scalar; ``dphi`` returns its gradient with the same shape.  The loop
    gradient comes from the DFT chain rule:
    delta F(t_j)_c = (1/2pi) sum_k [dRe_kc cos(k t_j) - dIm_kc sin(k t_j)].
    """
    t = grid.nodes
    ks = np.arange(kmax + 1)
    cos_t = np.cos(np.outer(ks, t))   # (K+1, N)
    sin_t = np.sin(np.outer(ks, t))

    def coords(values: np.ndarray) -> np.ndarray:
        c = dft(LoopSample(grid, values)).coeffs[: kmax + 1]
        return np.stack([c.real, c.imag], axis=-1)

    def value_fn(values: np.ndarray) -> float:
        return float(phi(coords(values)))

    def gradient_fn(values: np.ndarray) -> np.ndarray:
        g = np.asarray(dphi(coords(values)), dtype=float)  # (K+1, m, 2)
        out = (np.einsum("kc,kn->nc", g[..., 0], cos_t)
               - np.einsum("kc,kn->nc", g[..., 1], sin_t))
        return out / TWO_PI

    return Functional(name=name, value_fn=value_fn, gradient_fn=gradient_fn)
