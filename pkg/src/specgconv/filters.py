"""Declarative spectral responses F(lambda) for designing graph convolutions.

A FilterDesign is a small frozen value describing how a response is computed
from the eigenvalues of a graph Laplacian: closed low/high/band/all-pass
families, the Chebyshev basis by recursion, the CayleyNet real-coefficient
basis, or explicitly tabulated values. Designs have a canonical textual form
(``lowpass(eta=5)``, ``cheb(k=3)``, ...) used in config files.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .spectral import SpectralBasis


@dataclass(frozen=True)
class LowPass:
    """(1 - lambda/lambda_max)^eta; eta moves the cut-off frequency."""

    eta: float

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"lowpass exponent must be positive, got {self.eta}")


@dataclass(frozen=True)
class HighPass:
    """lambda/lambda_max."""


@dataclass(frozen=True)
class BandPass:
    """exp(-gamma (c*lambda_max - lambda)^2), center c as a fraction of lambda_max."""

    center: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.center < 1:
            raise ValueError(f"band-pass center must be in (0,1), got {self.center}")
        if self.gamma <= 0:
            raise ValueError(f"band-pass width must be positive, got {self.gamma}")


@dataclass(frozen=True)
class AllPass:
    """Constant 1."""


@dataclass(frozen=True)
class ExpLowPass:
    """exp(-lambda/tau)."""

    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"exp low-pass scale must be positive, got {self.tau}")


@dataclass(frozen=True)
class OneMinusRatio:
    """1 - lambda/lambda_max."""


@dataclass(frozen=True)
class ChebBasis:
    """k-th Chebyshev kernel profile, k >= 1 (F1 = 1, F2 = 2*lambda/lambda_max - 1)."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"Chebyshev index must be >= 1, got {self.k}")


@dataclass(frozen=True)
class CayleyBasis:
    """Column s of the Cayley basis matrix with scale h and order r."""

    s: int
    h: float
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"Cayley order must be >= 1, got {self.r}")
        if not 1 <= self.s <= 2 * self.r + 1:
            raise ValueError(f"Cayley column s must be in 1..{2 * self.r + 1}, got {self.s}")
        if self.h <= 0:
            raise ValueError(f"Cayley scale must be positive, got {self.h}")


@dataclass(frozen=True)
class Tabulated:
    """Explicit response values aligned to the ascending eigenvalues."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


FilterDesign = Union[
    LowPass, HighPass, BandPass, AllPass, ExpLowPass, OneMinusRatio,
    ChebBasis, CayleyBasis, Tabulated,
]

_NEEDS_LAMBDA_MAX = (LowPass, HighPass, BandPass, OneMinusRatio, ChebBasis)


def cayley_theta(x):
    """theta(x) = atan2(-1, x) - atan2(1, x); in (-2*pi, 0) with theta(0) = -pi."""
    return np.arctan2(-1.0, x) - np.arctan2(1.0, x)


def _cheb_values(k: int, lam: np.ndarray, lambda_max: float) -> np.ndarray:
    f2 = 2.0 * lam / lambda_max - 1.0
    if k == 1:
        return np.ones_like(lam)
    prev, cur = np.ones_like(lam), f2
    for _ in range(k - 2):
        prev, cur = cur, 2.0 * f2 * cur - prev
    return cur


def _cayley_column(s: int, h: float, lam: np.ndarray) -> np.ndarray:
    if s == 1:
        return np.ones_like(lam)
    t = cayley_theta(h * lam)
    if s % 2 == 0:
        return np.cos((s // 2) * t)
    return -np.sin(((s - 1) // 2) * t)


def evaluate_on(design: FilterDesign, lam: np.ndarray, lambda_max: float) -> np.ndarray:
    """Evaluate a design elementwise on given eigenvalues."""
    lam = np.asarray(lam, dtype=np.float64)
    if isinstance(design, _NEEDS_LAMBDA_MAX) and lambda_max <= 0:
        raise ValueError(
            f"{type(design).__name__} is undefined for lambda_max <= 0 (edgeless graph?)"
        )
    if isinstance(design, LowPass):
        return (1.0 - lam / lambda_max) ** design.eta
    if isinstance(design, HighPass):
        return lam / lambda_max
    if isinstance(design, BandPass):
        return np.exp(-design.gamma * (design.center * lambda_max - lam) ** 2)
    if isinstance(design, AllPass):
        return np.ones_like(lam)
    if isinstance(design, ExpLowPass):
        return np.exp(-lam / design.tau)
    if isinstance(design, OneMinusRatio):
        return 1.0 - lam / lambda_max
    if isinstance(design, ChebBasis):
        return _cheb_values(design.k, lam, lambda_max)
    if isinstance(design, CayleyBasis):
        return _cayley_column(design.s, design.h, lam)
    if isinstance(design, Tabulated):
        if design.values.shape[0] != lam.shape[0]:
            raise ValueError(
                f"tabulated design has {design.values.shape[0]} values "
                f"for {lam.shape[0]} eigenvalues"
            )
        return design.values.copy()
    raise TypeError(f"not a FilterDesign: {design!r}")


def evaluate(design: FilterDesign, basis: SpectralBasis) -> np.ndarray:
    """Evaluate a design at the basis eigenvalues (ascending order)."""
    return evaluate_on(design, basis.eigenvalues, basis.lambda_max)


@dataclass(frozen=True)
class BMatrix:
    """n x S matrix whose column s is the s-th designed response at lambda."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError(f"B matrix must be n x S with S >= 1, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_kernels(self) -> int:
        return self.values.shape[1]


def design_bmatrix(basis: SpectralBasis, designs: Sequence[FilterDesign]) -> BMatrix:
    return BMatrix(np.column_stack([evaluate(d, basis) for d in designs]))


def cayley_bmatrix(basis: SpectralBasis, h: float, r: int) -> BMatrix:
    """Cayley basis matrix with S = 2r+1 columns.

    Column 1 is all ones; even columns are cos((s/2) theta(h*lambda)); odd
    columns s >= 3 are -sin(((s-1)/2) theta(h*lambda)). Real coefficients
    (c0, a1, b1, ..., ar, br) against these columns reproduce the complex
    rational spectral filter with c_k = (a_k + i b_k)/2.
    """
    designs = [CayleyBasis(s=s, h=h, r=r) for s in range(1, 2 * r + 2)]
    return design_bmatrix(basis, designs)


def gcn_theoretical_profile(d_bar: float, lam: np.ndarray) -> np.ndarray:
    """Average-degree approximation of the GCN response: 1 - lambda*d/(d+1)."""
    if d_bar <= 0:
        raise ValueError(f"average degree must be positive, got {d_bar}")
    return 1.0 - np.asarray(lam, dtype=np.float64) * d_bar / (d_bar + 1.0)


def gcn_cutoff(d_bar: float) -> float:
    """Frequency where the approximate GCN response reaches zero: (d+1)/d."""
    if d_bar <= 0:
        raise ValueError(f"average degree must be positive, got {d_bar}")
    return (d_bar + 1.0) / d_bar


def coverage(designs: Sequence[FilterDesign], basis: SpectralBasis, grid: int = 256) -> float:
    """Spectrum-coverage diagnostic: min over a lambda grid of sum_s F_s.

    A set of designs meant to be problem agnostic should keep this away from
    zero; the CLI warns below 0.01. Tabulated designs are interpolated onto
    the grid.
    """
    lam = np.linspace(0.0, basis.lambda_max, grid)
    total = np.zeros(grid)
    for d in designs:
        if isinstance(d, Tabulated):
            total += np.interp(lam, basis.eigenvalues, d.values)
        else:
            total += evaluate_on(d, lam, basis.lambda_max)
    return float(total.min())


# ---------------------------------------------------------------------------
# canonical textual form
# ---------------------------------------------------------------------------

_DESIGN_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*(.*?)\s*\))?\s*$")


def _parse_args(body: str) -> dict:
    args = {}
    if not body:
        return args
    for part in body.split(","):
        if "=" not in part:
            raise ValueError(f"malformed design argument {part!r} (expected key=value)")
        key, value = (t.strip() for t in part.split("=", 1))
        args[key] = value
    return args


def parse_design(text: str, base_dir=None) -> FilterDesign:
    """Parse the canonical textual form of a design.

    Examples: ``lowpass(eta=5)``, ``highpass``, ``bandpass(c=0.5,gamma=0.25)``,
    ``allpass``, ``explowpass(tau=10)``, ``oneminus``, ``cheb(k=3)``,
    ``cayley(s=4,h=1,r=3)``, ``tabulated(file=values.csv)``. Relative
    tabulated paths resolve against base_dir when given.
    """
    m = _DESIGN_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse filter design {text!r}")
    name, body = m.group(1), m.group(2) or ""
    args = _parse_args(body)

    def take(key, conv):
        if key not in args:
            raise ValueError(f"design {name!r} is missing argument {key!r}")
        return conv(args.pop(key))

    if name == "lowpass":
        design = LowPass(eta=take("eta", float))
    elif name == "highpass":
        design = HighPass()
    elif name == "bandpass":
        design = BandPass(center=take("c", float), gamma=take("gamma", float))
    elif name == "allpass":
        design = AllPass()
    elif name == "explowpass":
        design = ExpLowPass(tau=take("tau", float))
    elif name == "oneminus":
        design = OneMinusRatio()
    elif name == "cheb":
        design = ChebBasis(k=take("k", int))
    elif name == "cayley":
        design = CayleyBasis(s=take("s", int), h=take("h", float), r=take("r", int))
    elif name == "tabulated":
        from .data import load_vector_csv

        path = take("file", str)
        if base_dir is not None:
            import os

            path = os.path.join(base_dir, path)
        design = Tabulated(values=load_vector_csv(path))
    else:
        raise ValueError(f"unknown filter design {name!r}")
    if args:
        raise ValueError(f"design {name!r} got unknown arguments {sorted(args)}")
    return design


def format_design(design: FilterDesign) -> str:
    """Canonical textual form (inverse of parse_design, except Tabulated)."""
    if isinstance(design, LowPass):
        return f"lowpass(eta={design.eta:g})"
    if isinstance(design, HighPass):
        return "highpass"
    if isinstance(design, BandPass):
        return f"bandpass(c={design.center:g},gamma={design.gamma:g})"
    if isinstance(design, AllPass):
        return "allpass"
    if isinstance(design, ExpLowPass):
        return f"explowpass(tau={design.tau:g})"
    if isinstance(design, OneMinusRatio):
        return "oneminus"
    if isinstance(design, ChebBasis):
        return f"cheb(k={design.k})"
    if isinstance(design, CayleyBasis):
        return f"cayley(s={design.s},h={design.h:g},r={design.r})"
    if isinstance(design, Tabulated):
        return f"tabulated(n={design.values.shape[0]})"
    raise TypeError(f"not a FilterDesign: {design!r}")
