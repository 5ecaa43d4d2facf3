"""Closed-form exponents and dimensions for gamma-LQG metric ball boundaries.

Everything here is a pure function of ``gamma`` and the plane dimension
``d_gamma``.  Since ``d_gamma`` is only known at ``gamma = sqrt(8/3)``, it is
supplied through a :class:`DGammaModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT_8_3 = math.sqrt(8.0 / 3.0)

_EXACT_TOL = 1e-12


def _check_gamma(gamma: float) -> None:
    if not (0.0 < gamma < 2.0) or not math.isfinite(gamma):
        raise ValueError(f"gamma must lie in (0, 2), got {gamma!r}")


def watabiki(gamma: float) -> float:
    """Watabiki's prediction ``1 + g^2/4 + sqrt((4 + g^2)^2 + 16 g^2) / 4``."""
    _check_gamma(gamma)
    g2 = gamma * gamma
    return 1.0 + g2 / 4.0 + 0.25 * math.sqrt((4.0 + g2) ** 2 + 16.0 * g2)


def quadratic_guess(gamma: float) -> float:
    """The quadratic alternative ``2 + g^2/2 + g/sqrt(6)``."""
    _check_gamma(gamma)
    return 2.0 + gamma * gamma / 2.0 + gamma / math.sqrt(6.0)


@dataclass(frozen=True)
class DGammaModel:
    """Source of ``d_gamma``.

    ``kind`` is one of ``"exact"`` (the value 4, valid only at sqrt(8/3)),
    ``"watabiki"``, ``"quad"`` or ``"user"`` (with ``value`` set).
    """

    kind: str
    value: float | None = None

    KINDS = ("exact", "watabiki", "quad", "user")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown d_gamma model {self.kind!r}")
        if self.kind == "user":
            if self.value is None or not math.isfinite(self.value) or self.value <= 2.0:
                raise ValueError("user-supplied d_gamma must be a finite number > 2")
        elif self.value is not None:
            raise ValueError(f"model {self.kind!r} takes no value")

    @classmethod
    def exact(cls) -> "DGammaModel":
        return cls("exact")

    @classmethod
    def user(cls, value: float) -> "DGammaModel":
        return cls("user", float(value))

    @classmethod
    def parse(cls, text: str) -> "DGammaModel":
        """Parse the CLI spelling: ``exact``, ``watabiki``, ``quad`` or ``user:<v>``."""
        text = text.strip()
        if text.startswith("user:"):
            try:
                v = float(text[5:])
            except ValueError:
                raise ValueError(f"bad user d_gamma value in {text!r}") from None
            return cls.user(v)
        return cls(text)

    def __str__(self) -> str:
        return f"user:{self.value!r}" if self.kind == "user" else self.kind

    def d_gamma(self, gamma: float) -> float:
        _check_gamma(gamma)
        if self.kind == "exact":
            if abs(gamma - SQRT_8_3) > _EXACT_TOL:
                raise ValueError("the exact model d_gamma = 4 only holds at gamma = sqrt(8/3)")
            return 4.0
        if self.kind == "watabiki":
            return watabiki(gamma)
        if self.kind == "quad":
            return quadratic_guess(gamma)
        return float(self.value)


@dataclass(frozen=True)
class GammaParams:
    """Coupling ``gamma`` and plane dimension ``d_gamma``.

    ``xi`` and ``q`` are derived on access and never stored.
    """

    gamma: float
    d_gamma: float

    def __post_init__(self):
        _check_gamma(self.gamma)
        if not (math.isfinite(self.d_gamma) and self.d_gamma > 2.0):
            raise ValueError(f"d_gamma must be > 2, got {self.d_gamma!r}")

    @property
    def xi(self) -> float:
        return self.gamma / self.d_gamma

    @property
    def q(self) -> float:
        return 2.0 / self.gamma + self.gamma / 2.0


def make_params(gamma: float, model: DGammaModel | str = "exact") -> GammaParams:
    if isinstance(model, str):
        model = DGammaModel.parse(model)
    return GammaParams(float(gamma), model.d_gamma(float(gamma)))


def euclid_boundary_dim(p: GammaParams) -> float:
    """Euclidean dimension of a metric ball boundary, ``2 - xi Q + xi^2/2``."""
    xi = p.xi
    return 2.0 - xi * p.q + xi * xi / 2.0


def quantum_boundary_dim(p: GammaParams) -> float:
    return p.d_gamma - 1.0


def thick_euclid_dim(p: GammaParams, alpha):
    """``2 - xi (Q - alpha) - alpha^2/2``; negative outside the alpha window.

    Accepts scalars or arrays.
    """
    alpha = np.asarray(alpha, dtype=float) if np.ndim(alpha) else float(alpha)
    return 2.0 - p.xi * (p.q - alpha) - alpha * alpha / 2.0


def thick_quantum_dim(p: GammaParams, alpha):
    """``(2 - alpha^2/2) / (xi (Q - alpha)) - 1``, defined for ``alpha < Q``."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a >= p.q):
        raise ValueError(f"thick_quantum_dim has a pole at alpha = Q = {p.q}")
    out = (2.0 - a * a / 2.0) / (p.xi * (p.q - a)) - 1.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AlphaWindow:
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, alpha) -> bool | np.ndarray:
        a = np.asarray(alpha, dtype=float)
        out = (a > self.lo) & (a < self.hi)
        return bool(out) if out.ndim == 0 else out


def alpha_window(p: GammaParams) -> AlphaWindow:
    """Open interval of alpha where the thick-point dimensions are positive."""
    xi = p.xi
    disc = 4.0 - 2.0 * xi * p.q + xi * xi
    if disc <= 0.0:
        raise ValueError("alpha window is empty (nonpositive discriminant)")
    half = math.sqrt(disc)
    return AlphaWindow(xi - half, xi + half)


def is_in_window(p: GammaParams, alpha):
    return alpha_window(p).contains(alpha)


def one_point_exponent(p: GammaParams, alpha):
    """Decay exponent ``xi (Q - alpha) + alpha^2/2`` of the one-point event."""
    return p.xi * (p.q - alpha) + alpha * alpha / 2.0


def moment_exponent_range(p: GammaParams) -> tuple[float, float]:
    return 0.0, 2.0 * p.d_gamma / p.gamma - 1.0


def moment_exponent(p: GammaParams, pexp: float, *, strict: bool = True) -> float:
    """``(p+1) xi Q - (p+1)^2 xi^2 / 2``.

    With ``strict`` the moment order must lie in ``[0, 2 d_gamma/gamma - 1]``,
    the range on which the worst-case alpha ``(p+1) xi`` stays in ``[-2, 2]``.
    ``strict=False`` evaluates the quadratic for any ``pexp >= 0`` (its vertex
    ``Q/xi - 1`` lies outside the strict range for every gamma < 2).
    """
    lo, hi = moment_exponent_range(p)
    if pexp < lo or (strict and pexp > hi):
        raise ValueError(f"moment order {pexp} outside [{lo}, {hi}]")
    k = pexp + 1.0
    return k * p.xi * p.q - k * k * p.xi * p.xi / 2.0


def diam_tail_exponent(alpha: float) -> float:
    return alpha * alpha / 2.0


def formula_table(p: GammaParams, alphas=None) -> list[dict]:
    """Rows of every dimension formula at ``p``; one row per alpha if given."""
    base = {
        "gamma": p.gamma,
        "d_gamma": p.d_gamma,
        "xi": p.xi,
        "q": p.q,
        "euclid_boundary_dim": euclid_boundary_dim(p),
        "quantum_boundary_dim": quantum_boundary_dim(p),
    }
    try:
        win = alpha_window(p)
        base["alpha_lo"], base["alpha_hi"] = win.lo, win.hi
    except ValueError:
        win = None
        base["alpha_lo"] = base["alpha_hi"] = float("nan")
    if alphas is None:
        return [base]
    rows = []
    for a in alphas:
        a = float(a)
        row = dict(base)
        row["alpha"] = a
        row["thick_euclid_dim"] = thick_euclid_dim(p, a)
        row["thick_quantum_dim"] = thick_quantum_dim(p, a) if a < p.q else float("nan")
        row["one_point_exponent"] = one_point_exponent(p, a)
        row["in_window"] = bool(win is not None and win.contains(a))
        rows.append(row)
    return rows
