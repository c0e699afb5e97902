"""Discrete weighted Hardy inequalities and the explicit norm constants."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .walk import check_exponent


def conjugate(p: float) -> float:
    p = check_exponent(p)
    return p / (p - 1.0)


def hardy_constant(p: float) -> float:
    """``C_p = p**(1/p) q**(1/q)``."""
    q = conjugate(p)
    return p ** (1.0 / p) * q ** (1.0 / q)


def muckenhoupt_best_A(U, V, p: float, direction: str = "forward") -> float:
    """Smallest ``A`` satisfying the Muckenhoupt condition for all cut points r.

    forward:  ``max_r (sum_{k>=r} U_k^p)^{1/p} (sum_{k<=r} V_k^{-q})^{1/q}``
    reversed: ``max_r (sum_{k<=r} U_k^p)^{1/p} (sum_{k>=r} V_k^{-q})^{1/q}``
    """
    q = conjugate(p)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape or np.any(U <= 0) or np.any(V <= 0):
        raise ValueError("U and V must be positive vectors of equal length")
    up = U ** p
    vq = V ** -q
    if direction == "forward":
        head = np.cumsum(vq)
        tail = np.cumsum(up[::-1])[::-1]
        return float(np.max(tail ** (1 / p) * head ** (1 / q)))
    if direction == "reversed":
        head = np.cumsum(up)
        tail = np.cumsum(vq[::-1])[::-1]
        return float(np.max(head ** (1 / p) * tail ** (1 / q)))
    raise ValueError(f"direction must be 'forward' or 'reversed', got {direction!r}")


def hardy_sides(U, V, f, p: float, direction: str = "forward") -> tuple[float, float]:
    """Both sides of the Hardy inequality without the constant.

    Returns ``(||U * partial_sums(f)||_p, ||V f||_p)`` where the partial sums
    run over ``l <= k`` (forward) or ``l >= k`` (reversed).
    """
    p = check_exponent(p)
    U, V, f = (np.asarray(a, dtype=float) for a in (U, V, f))
    if direction == "forward":
        sums = np.cumsum(f)
    elif direction == "reversed":
        sums = np.cumsum(f[::-1])[::-1]
    else:
        raise ValueError(f"direction must be 'forward' or 'reversed', got {direction!r}")
    lhs = np.sum(np.abs(U * sums) ** p) ** (1 / p)
    rhs = np.sum(np.abs(V * f) ** p) ** (1 / p)
    return float(lhs), float(rhs)


def partial_sum_inequality(alpha, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Sides of ``sum_{k<=r} a_k (sum_{l<=k} a_l)^{-1/p} <= q (sum_{k<=r} a_k)^{1/q}``.

    Returned as arrays over r = 1..N.
    """
    q = conjugate(p)
    alpha = np.asarray(alpha, dtype=float)
    head = np.cumsum(alpha)
    lhs = np.cumsum(alpha * head ** (-1 / p))
    return lhs, q * head ** (1 / q)


def tail_sum_inequality(alpha, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Sides of ``sum_{k>=r} a_k (sum_{l<=k} a_l)^{-p} <= 2/min(1,p-1) (sum_{k<=r} a_k)^{1-p}``."""
    p = check_exponent(p)
    alpha = np.asarray(alpha, dtype=float)
    head = np.cumsum(alpha)
    terms = alpha * head ** (-p)
    lhs = np.cumsum(terms[::-1])[::-1]
    return lhs, 2.0 / min(1.0, p - 1.0) * head ** (1 - p)


def script_T0_matrix(Q) -> np.ndarray:
    """``T0 F(s) = Q_s sum_{t<=s} F(t)`` as a lower-triangular matrix."""
    Q = np.asarray(Q, dtype=float)
    return np.tril(np.ones((Q.size, Q.size))) * Q[:, None]


def script_T1_matrix(alpha) -> np.ndarray:
    """``T1 F(s) = alpha_s sum_{t>s} F(t) / sum_{j<=t} alpha_j`` (strictly upper)."""
    alpha = np.asarray(alpha, dtype=float)
    head = np.cumsum(alpha)
    return np.triu(np.ones((alpha.size, alpha.size)), 1) * alpha[:, None] / head[None, :]


def script_T0_apply(Q, F) -> np.ndarray:
    return np.asarray(Q, dtype=float) * np.cumsum(np.asarray(F, dtype=float), axis=-1)


def script_T1_apply(alpha, F) -> np.ndarray:
    """Uses the telescoped coefficient ``alpha_s / sum_{j<=t} alpha_j``."""
    alpha = np.asarray(alpha, dtype=float)
    F = np.asarray(F, dtype=float)
    scaled = F / np.cumsum(alpha)
    strict_tail = np.cumsum(scaled[..., ::-1], axis=-1)[..., ::-1] - scaled
    return alpha * strict_tail


@dataclass(frozen=True)
class Constants:
    """Explicit constants depending on p only."""

    p: float
    q: float
    C_p: float
    C_bar: float
    C_hat: float
    C_tilde: float
    T1_bound: float

    @property
    def assembled(self) -> float:
        """Sum of the two one-sided bounds, which the reduced-operator norm obeys."""
        return self.C_tilde + self.T1_bound

    def to_dict(self) -> dict:
        out = asdict(self)
        out["assembled"] = self.assembled
        return out


def theoretical_constants(p: float) -> Constants:
    q = conjugate(p)
    Cp = hardy_constant(p)
    worst = max((p - 1) ** (-1 / p), (q - 1) ** (-1 / q))
    C_bar = 4 * Cp * (1 + worst)
    return Constants(
        p=p,
        q=q,
        C_p=Cp,
        C_bar=C_bar,
        C_hat=C_bar / 2,
        C_tilde=2 ** (1 / p) * Cp * max(1.0, (p - 1) ** (-1 / p)),
        T1_bound=2 ** (1 / q) * Cp * max(1.0, (q - 1) ** (-1 / q)),
    )
