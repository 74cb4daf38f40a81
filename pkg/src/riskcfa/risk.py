"""Empirical risk measures over equally weighted samples.

Closed forms for VaR, CVaR, PoE and BPoE, plus LP fragments that embed the
CVaR and BPoE epigraph formulations into a larger :class:`~riskcfa.lp.LpModel`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .lp import Affine, LpModel, Sense, add_row


class RiskDomainError(ValueError):
    pass


def _sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise RiskDomainError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise RiskDomainError("sample contains non-finite values")
    return x


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise RiskDomainError(f"risk level alpha must lie in [0, 1), got {alpha}")


def var(values, alpha: float) -> float:
    """Smallest sample value ``z`` with empirical ``P(X <= z) >= alpha``."""
    x = np.sort(_sample(values))
    if not 0.0 <= alpha <= 1.0:
        raise RiskDomainError(f"alpha must lie in [0, 1], got {alpha}")
    # guard against alpha*n landing a hair above an integer
    k = max(1, math.ceil(alpha * x.size - 1e-12))
    return float(x[k - 1])


def cvar(values, alpha: float) -> float:
    """Mean of the worst ``1 - alpha`` tail, splitting the boundary atom."""
    _check_alpha(alpha)
    x = _sample(values)
    z = var(x, alpha)
    return float(z + np.maximum(x - z, 0.0).mean() / (1.0 - alpha))


def poe(values, zeta: float) -> float:
    """Fraction of outcomes strictly above ``zeta``."""
    x = _sample(values)
    return float(np.mean(x > zeta))


def bpoe(values, zeta: float) -> float:
    """Buffered probability of exceedance, ``min_{g>=0} E[g (X - zeta) + 1]^+``.

    The objective is convex and piecewise linear in ``g`` with kinks at
    ``1 / (zeta - x_i)``, so the minimum over those points (and 0) is exact.
    For ``zeta`` at or above the maximum, the ``g -> inf`` limit applies.
    """
    x = _sample(values)
    if not math.isfinite(zeta):
        raise RiskDomainError(f"threshold must be finite, got {zeta}")
    top = x.max()
    if zeta > top:
        return 0.0
    if zeta == top:
        return float(np.mean(x == top))
    # at the kink g = 1/(zeta - x_j) the objective equals
    # mean((x - x_j)+) / (zeta - x_j); sorted suffix sums give all of them
    xs = np.sort(x)
    n = xs.size
    j = np.arange(n)[xs < zeta]
    suffix = np.cumsum(xs[::-1])[::-1]
    with np.errstate(over="ignore"):  # kinks at vanishing distance are +inf
        vals = (suffix[j] - (n - j) * xs[j]) / (n * (zeta - xs[j]))
    # bpoe >= poe holds exactly; keep round-off from breaking it
    return float(max(min(vals.min(initial=1.0), 1.0), np.mean(x > zeta)))


# ---------------------------------------------------------------------------
# LP fragments
# ---------------------------------------------------------------------------

@dataclass
class CvarFragment:
    objective: Affine
    z: int
    y: list[int]


def cvar_epigraph(model: LpModel, costs: Sequence[Affine], alpha: float, prefix: str = "cvar") -> CvarFragment:
    """Append ``z`` free, ``y_w >= 0`` and rows ``C_w - z - y_w <= 0``.

    The returned objective term is ``z + sum(y_w) / ((1 - alpha) |W|)``.
    """
    _check_alpha(alpha)
    if not costs:
        raise RiskDomainError("CVaR fragment needs at least one scenario")
    z = model.add_variable(-math.inf, math.inf, f"{prefix}_z")
    ys = []
    weight = 1.0 / ((1.0 - alpha) * len(costs))
    term = Affine.var(z)
    for w, c in enumerate(costs):
        y = model.add_variable(0.0, math.inf, f"{prefix}_y{w}")
        ys.append(y)
        add_row(model, _affine(c) - Affine.var(z) - Affine.var(y), Sense.LE, 0.0, f"{prefix}_row{w}")
        term = term + Affine.var(y, weight)
    return CvarFragment(term, z, ys)


VARIABLE = "variable"


@dataclass
class BpoeFragment:
    objective: Affine
    eta: list[int]
    gamma: Union[float, int]


def bpoe_epigraph(model: LpModel, losses: Sequence[Affine], zeta: float,
                  gamma: Union[float, str] = VARIABLE, prefix: str = "bpoe") -> BpoeFragment:
    """Append ``eta_w >= 0`` and rows ``g L_w - g zeta + 1 - eta_w <= 0``.

    With ``gamma=VARIABLE`` the scalar ``g >= 0`` becomes an LP variable,
    which keeps the rows linear only when every ``L_w`` is a constant.
    A numeric ``gamma`` fixes the scalar and the rows stay linear in ``x``.
    """
    if not losses:
        raise RiskDomainError("BPoE fragment needs at least one scenario")
    if not math.isfinite(zeta):
        raise RiskDomainError(f"threshold must be finite, got {zeta}")
    losses = [_affine(l) for l in losses]
    n = len(losses)
    etas = []
    term = Affine()
    if gamma == VARIABLE:
        if any(l.coef for l in losses):
            raise RiskDomainError("a variable gamma requires constant losses (the product would be bilinear)")
        g = model.add_variable(0.0, math.inf, f"{prefix}_gamma")
        for w, l in enumerate(losses):
            eta = model.add_variable(0.0, math.inf, f"{prefix}_eta{w}")
            etas.append(eta)
            add_row(model, Affine({g: l.const - zeta, eta: -1.0}), Sense.LE, -1.0, f"{prefix}_row{w}")
            term = term + Affine.var(eta, 1.0 / n)
        return BpoeFragment(term, etas, g)
    gamma = float(gamma)
    if gamma < 0 or not math.isfinite(gamma):
        raise RiskDomainError(f"gamma must be finite and nonnegative, got {gamma}")
    for w, l in enumerate(losses):
        eta = model.add_variable(0.0, math.inf, f"{prefix}_eta{w}")
        etas.append(eta)
        add_row(model, gamma * l - gamma * zeta + 1.0 - Affine.var(eta), Sense.LE, 0.0, f"{prefix}_row{w}")
        term = term + Affine.var(eta, 1.0 / n)
    return BpoeFragment(term, etas, gamma)


def _affine(v) -> Affine:
    return v if isinstance(v, Affine) else Affine(const=float(v))
