"""Per-realization incident / harvested power for each transmit strategy.

Channel arguments are complex arrays whose last axis indexes antennas, so a
single draw has shape (M,) and a batch (n, M).  Multi-user draws are
(M, S) or batched (B, M, S) with one column per device.  Antenna indices
in the public API are 1-based.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import ChannelDraw
from .eh import EhModel, IdealLinear
from .errors import ValidationError

__all__ = [
    "MultiUserDraw",
    "Strategy",
    "aa_csi_multi",
    "aa_csi_multi_batch",
    "aa_csi_single",
    "harvest_multi_user",
    "harvest_single_user",
    "harvested_sa",
    "ideal_energies",
    "oa_csi_select",
    "oa_csi_select_batch",
    "rf_power_aa",
    "rf_power_oa",
    "theorem1_check",
]

EQ_RTOL = 1e-12


class Strategy(str, enum.Enum):
    OA = "OA"
    AA = "AA"
    SA = "SA"
    OA_CSI = "OA_CSI"
    AA_CSI = "AA_CSI"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown strategy {value!r}; expected one of {[s.value for s in cls]}"
            ) from None

    @property
    def uses_csi(self) -> bool:
        return self in (Strategy.OA_CSI, Strategy.AA_CSI)


def _as_h(h) -> np.ndarray:
    if isinstance(h, ChannelDraw):
        return h.h
    return np.asarray(h, dtype=complex)


def rf_power_oa(h, rho: float, antenna: int = 1):
    """rho * |h_antenna|^2 for a fixed (1-based) antenna."""
    h = _as_h(h)
    m = h.shape[-1]
    if not 1 <= antenna <= m:
        raise ValidationError(f"antenna index {antenna} out of range 1..{m}")
    return rho * np.abs(h[..., antenna - 1]) ** 2


def rf_power_aa(h, rho: float):
    """Equal-power transmission on all antennas: (rho/M) |sum_i h_i|^2."""
    h = _as_h(h)
    return rho / h.shape[-1] * np.abs(h.sum(axis=-1)) ** 2


def harvested_sa(h, rho: float, model: EhModel):
    """Antenna switching: g is applied per sub-block, then averaged."""
    h = _as_h(h)
    return model(rho * np.abs(h) ** 2).mean(axis=-1)


def aa_csi_single(h, rho: float):
    """Incident power under MRT for one device: rho * ||h||^2."""
    h = _as_h(h)
    return rho * (np.abs(h) ** 2).sum(axis=-1)


def harvest_single_user(strategy, h, rho: float, model: EhModel, antenna: int = 1):
    """Harvested power of one device for every draw in ``h`` (shape (..., M)).

    For a single device the CSI benchmarks reduce to the strongest antenna
    (OA-CSI) and MRT (AA-CSI) under any non-decreasing ``model``.
    """
    strategy = Strategy.parse(strategy)
    h = _as_h(h)
    if strategy is Strategy.OA:
        return model(rf_power_oa(h, rho, antenna))
    if strategy is Strategy.AA:
        return model(rf_power_aa(h, rho))
    if strategy is Strategy.SA:
        return harvested_sa(h, rho, model)
    if strategy is Strategy.OA_CSI:
        return model(rho * (np.abs(h) ** 2).max(axis=-1))
    return model(aa_csi_single(h, rho))


# ---------------------------------------------------------------------------
# multi-user


@dataclass(frozen=True)
class MultiUserDraw:
    channels: np.ndarray  # (M, S) complex, column j is h_j
    rho_vec: np.ndarray  # (S,)

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        rho = np.atleast_1d(np.asarray(self.rho_vec, dtype=float))
        if ch.ndim != 2 or ch.shape[1] < 1:
            raise ValidationError("channels must be an (M, S) matrix with S >= 1")
        if rho.shape != (ch.shape[1],) or np.any(~(rho > 0)):
            raise ValidationError("rho_vec must hold one positive value per device")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "rho_vec", rho)

    @property
    def m(self) -> int:
        return self.channels.shape[0]

    @property
    def n_users(self) -> int:
        return self.channels.shape[1]


def oa_csi_select_batch(H: np.ndarray, rho: np.ndarray, model: EhModel):
    """Best single antenna for the total harvested power, per batch element.

    Returns 1-based indices (B,) and per-user harvested power (B, S).
    ``argmax`` keeps the first maximum, i.e. ties go to the lowest index.
    """
    H = np.asarray(H, dtype=complex)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (H.shape[0], H.shape[2]))
    per = model(rho[:, None, :] * np.abs(H) ** 2)  # (B, M, S)
    best = np.argmax(per.sum(axis=2), axis=1)
    harvested = np.take_along_axis(per, best[:, None, None], axis=1)[:, 0, :]
    return best + 1, harvested


def oa_csi_select(draw: MultiUserDraw, model: EhModel) -> tuple[int, np.ndarray]:
    idx, harvested = oa_csi_select_batch(draw.channels[None], draw.rho_vec[None], model)
    return int(idx[0]), harvested[0]


def _normalize(W: np.ndarray) -> np.ndarray:
    norm = np.sqrt((np.abs(W) ** 2).sum(axis=(1, 2), keepdims=True))
    return W / norm


def _seed_beams(H: np.ndarray, rho: np.ndarray, n_beams: int, n_random: int, rng) -> list[np.ndarray]:
    B, M, S = H.shape
    seeds = []
    for j in range(S):
        W = np.zeros((B, n_beams, M), dtype=complex)
        W[:, 0, :] = np.conj(H[:, :, j])
        seeds.append(W)
    W = np.zeros((B, n_beams, M), dtype=complex)
    W[:, 0, :] = 1.0
    seeds.append(W)
    # dominant eigenvector of sum_j rho_j conj(h_j) h_j^T: optimum for the linear model
    A = np.einsum("bs,bis,bks->bik", rho, np.conj(H), H)
    _, vecs = np.linalg.eigh(A)
    W = np.zeros((B, n_beams, M), dtype=complex)
    W[:, 0, :] = vecs[:, :, -1]
    seeds.append(W)
    for _ in range(n_random):
        z = rng.standard_normal((B, n_beams, M)) + 1j * rng.standard_normal((B, n_beams, M))
        seeds.append(z)
    out = []
    for W in seeds:
        # zero channels would give a zero MRT seed; replace with equal power
        norm = np.sqrt((np.abs(W) ** 2).sum(axis=(1, 2)))
        W[norm == 0, 0, :] = 1.0
        out.append(_normalize(W))
    return out


def _refine(W, H, rho, model, n_evals, step0):
    """Coordinate perturbation with per-element shrinking step.

    Keeps Y = W @ H and the unnormalized per-user power so that a trial move
    costs O(B*S).
    """
    B, L, M = W.shape
    W = W.copy()
    Y = W @ H  # (B, L, S)
    P = (np.abs(Y) ** 2).sum(axis=1)  # (B, S), ||W|| = 1
    val = model(rho * P).sum(axis=1)
    step = np.full(B, step0)
    improved_in_sweep = np.zeros(B, dtype=bool)
    coords = [(k, i, part) for k in range(L) for i in range(M) for part in (1.0, 1j)]
    n_coords = len(coords)
    used = 0
    c = 0
    while used < n_evals:
        k, i, part = coords[c % n_coords]
        for sign in (1.0, -1.0):
            if used >= n_evals:
                break
            used += 1
            delta = sign * part * step  # (B,)
            y_new = Y[:, k, :] + delta[:, None] * H[:, i, :]
            w_old = W[:, k, i]
            norm2 = 1.0 + 2.0 * np.real(np.conj(w_old) * delta) + np.abs(delta) ** 2
            p_new = (P - np.abs(Y[:, k, :]) ** 2 + np.abs(y_new) ** 2) / norm2[:, None]
            v_new = model(rho * p_new).sum(axis=1)
            acc = v_new > val
            if acc.any():
                scale = 1.0 / np.sqrt(norm2[acc])
                W[acc, k, i] = w_old[acc] + delta[acc]
                Y[acc, k, :] = y_new[acc]
                W[acc] *= scale[:, None, None]
                Y[acc] *= scale[:, None, None]
                P[acc] = p_new[acc]
                val[acc] = v_new[acc]
                improved_in_sweep |= acc
            if acc.all():
                break
        c += 1
        if c % n_coords == 0:
            step = np.where(improved_in_sweep, step, 0.5 * step)
            improved_in_sweep[:] = False
    return W, val


def aa_csi_multi_batch(
    H: np.ndarray,
    rho,
    model: EhModel,
    budget: int | None = None,
    rng: np.random.Generator | None = None,
    n_random: int = 2,
):
    """Heuristic sum-harvest beamforming over a batch of multi-user draws.

    Random-restart local search: restarts from MRT toward each device, the
    equal-power vector, the dominant eigen-beam and ``n_random`` random unit
    vectors; each restart is refined by coordinate perturbation.  ``budget``
    counts objective evaluations per draw (default 200*M*S).  No global
    optimality is claimed.

    Returns the beam sets (B, L, M) with unit total power, L = min(M, S),
    and per-user harvested power (B, S).
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 3:
        raise ValidationError("H must have shape (B, M, S)")
    B, M, S = H.shape
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (B, S))
    if budget is None:
        budget = 200 * M * S
    n_beams = min(M, S)
    rng = rng if rng is not None else np.random.default_rng(0)
    seeds = _seed_beams(H, rho, n_beams, n_random, rng)
    if budget < len(seeds):
        raise ValidationError(f"budget {budget} is smaller than the {len(seeds)} restarts")
    per_restart = (budget - len(seeds)) // len(seeds)

    best_W = None
    best_val = np.full(B, -np.inf)
    for W0 in seeds:
        W, val = _refine(W0, H, rho, model, per_restart, step0=0.5 / np.sqrt(M))
        better = val > best_val
        if best_W is None:
            best_W = W
        else:
            best_W[better] = W[better]
        best_val = np.where(better, val, best_val)
    P = (np.abs(best_W @ H) ** 2).sum(axis=1)
    return best_W, model(rho * P)


def aa_csi_multi(
    draw: MultiUserDraw,
    model: EhModel,
    budget: int | None = None,
    rng: np.random.Generator | None = None,
):
    W, harvested = aa_csi_multi_batch(draw.channels[None], draw.rho_vec[None], model, budget, rng)
    return W[0], harvested[0]


def harvest_multi_user(strategy, H, rho, model: EhModel, rng=None, budget=None, antenna: int = 1):
    """Per-user harvested power (B, S) for batched multi-user draws (B, M, S)."""
    strategy = Strategy.parse(strategy)
    H = np.asarray(H, dtype=complex)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (H.shape[0], H.shape[2]))
    gains = np.abs(H) ** 2
    if strategy is Strategy.OA:
        return model(rho * gains[:, antenna - 1, :])
    if strategy is Strategy.AA:
        return model(rho / H.shape[1] * np.abs(H.sum(axis=1)) ** 2)
    if strategy is Strategy.SA:
        return model(rho[:, None, :] * gains).mean(axis=1)
    if strategy is Strategy.OA_CSI:
        return oa_csi_select_batch(H, rho, model)[1]
    if H.shape[2] == 1:
        # MRT is optimal for one device under any non-decreasing g
        return model(rho * gains.sum(axis=1))
    return aa_csi_multi_batch(H, rho, model, budget=budget, rng=rng)[1]


# ---------------------------------------------------------------------------
# ideal-model ordering


def ideal_energies(h, rho: float, eta: float, antenna: int = 1) -> dict[Strategy, np.ndarray]:
    """Harvested power of all five strategies under the ideal linear model."""
    h = _as_h(h)
    model = IdealLinear(eta)
    return {s: harvest_single_user(s, h, rho, model, antenna) for s in Strategy}


def _le(a, b):
    return a <= b + EQ_RTOL * np.maximum(np.abs(a), np.abs(b))


def _eq(a, b):
    return np.abs(a - b) <= EQ_RTOL * np.maximum(np.abs(a), np.abs(b))


def theorem1_check(h, rho: float, eta: float):
    """OA <= OA-CSI <= AA-CSI = M*SA and AA <= AA-CSI, per draw.

    Returns a bool (or bool array for batched ``h``).
    """
    h = _as_h(h)
    m = h.shape[-1]
    e = ideal_energies(h, rho, eta)
    ok = (
        _le(e[Strategy.OA], e[Strategy.OA_CSI])
        & _le(e[Strategy.OA_CSI], e[Strategy.AA_CSI])
        & _eq(e[Strategy.AA_CSI], m * e[Strategy.SA])
        & _le(e[Strategy.AA], e[Strategy.AA_CSI])
    )
    return bool(ok) if np.ndim(ok) == 0 else ok
