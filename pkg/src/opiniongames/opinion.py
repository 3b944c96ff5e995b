"""From probabilities to opinions.

Opinions are real vectors over each agent's options, mapped to
categorical distributions by softmax. The opinion-weighted game value
averages the per-tuple subgame values under the product of those
distributions; its analytic gradients and Hessians in opinion space
drive a saturated opinion-dynamics model whose coupling gains are the
negated Hessian blocks. Attention scales the nonlinear exchange term
and is itself driven by the price of indecision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softmax(z) -> np.ndarray:
    """Stable softmax; shift-invariant, output sums to one."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite opinion entries")
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_jacobian(z) -> np.ndarray:
    """d sigma / d z = diag(sigma) - sigma sigma'."""
    s = softmax(z)
    return np.diag(s) - np.outer(s, s)


def softmax_hessian(z) -> np.ndarray:
    """Second derivatives H[l, a, b] = d2 sigma_l / (dz_a dz_b)."""
    s = softmax(z)
    n = len(s)
    eye = np.eye(n)
    m1 = eye - s[None, :]                     # m1[l, a] = delta_la - s_a
    outer = m1[:, :, None] * m1[:, None, :]   # (l, a, b)
    corr = s[None, :, None] * (eye[None, :, :] - s[None, None, :])
    return s[:, None, None] * (outer - corr)


@dataclass(frozen=True)
class ValueTable:
    """Per-player subgame values over the full option-tuple grid.

    ``values[i]`` has one axis per agent; entry ``values[i][l1, ..., lN]``
    is player i's value when agent k picks its option ``lk``.
    """

    values: tuple

    def __post_init__(self):
        shape = self.values[0].shape
        if len(shape) != len(self.values):
            raise ValueError("need one table axis per player")
        for v in self.values:
            if v.shape != shape:
                raise ValueError("inconsistent table shapes")
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite value table")

    @property
    def option_counts(self) -> tuple:
        return self.values[0].shape

    @property
    def n_players(self) -> int:
        return len(self.values)


def make_table(arrays) -> ValueTable:
    return ValueTable(tuple(np.asarray(a, dtype=float) for a in arrays))


def _contract(table, sigmas, keep):
    """Sum the table against sigma over every axis not in ``keep``.

    Remaining axes come out ordered by their original axis index.
    """
    out = table
    for ax in reversed(range(table.ndim)):
        if ax in keep:
            continue
        out = np.tensordot(out, sigmas[ax], axes=([ax], [0]))
    return out


def opinion_weighted_value(player, z_all, table: ValueTable) -> float:
    """Expected value of one player under the product of softmax weights."""
    sigmas = [softmax(z) for z in z_all]
    return float(_contract(table.values[player], sigmas, keep=()))


def value_gradient(player, wrt, z_all, table: ValueTable) -> np.ndarray:
    """Gradient of the opinion-weighted value w.r.t. agent ``wrt``'s opinion."""
    sigmas = [softmax(z) for z in z_all]
    partial = _contract(table.values[player], sigmas, keep=(wrt,))
    return softmax_jacobian(z_all[wrt]) @ partial


def value_hessian_block(player, j, k, z_all, table: ValueTable) -> np.ndarray:
    """Hessian block d2 V_player / (dz_j dz_k), evaluated at z_all."""
    sigmas = [softmax(z) for z in z_all]
    if j == k:
        partial = _contract(table.values[player], sigmas, keep=(j,))
        return np.tensordot(softmax_hessian(z_all[j]), partial, axes=([0], [0]))
    lo, hi = min(j, k), max(j, k)
    pair = _contract(table.values[player], sigmas, keep=(lo, hi))
    if j != lo:
        pair = pair.T
    return softmax_jacobian(z_all[j]) @ pair @ softmax_jacobian(z_all[k])


def value_hessian(player, z_all, table: ValueTable) -> np.ndarray:
    """Full Hessian of one player's opinion-weighted value over stacked opinions."""
    counts = [len(z) for z in z_all]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    H = np.zeros((offsets[-1], offsets[-1]))
    for j in range(len(z_all)):
        for k in range(len(z_all)):
            H[offsets[j]:offsets[j + 1], offsets[k]:offsets[k + 1]] = \
                value_hessian_block(player, j, k, z_all, table)
    return 0.5 * (H + H.T)


def assemble_system_matrix(z_all, table: ValueTable) -> np.ndarray:
    """Opinion-coupling matrix: row block i holds -d2 V_i / (dz_i dz_j).

    Linearizing the gradient-descent opinion flow about ``z_all`` gives
    exactly this matrix.
    """
    counts = [len(z) for z in z_all]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    M = np.zeros((offsets[-1], offsets[-1]))
    for i in range(len(z_all)):
        for j in range(len(z_all)):
            M[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = \
                -value_hessian_block(i, i, j, z_all, table)
    return M


@dataclass(frozen=True)
class GinodParams:
    """State-dependent opinion-dynamics gains and damping.

    ``coupling[i][j]`` is the (N_i x N_j) gain block acting from agent
    j's deviation onto agent i's; it equals the negated value-Hessian
    block. Diagonals of ``coupling[i][i]`` are the self-reinforcement
    gains, off-diagonals the inter-option couplings; cross blocks carry
    the inter-agent gains.
    """

    coupling: tuple         # tuple over i of tuple over j of ndarrays
    damping: tuple          # tuple over i of per-option damping vectors

    def alpha(self, i) -> np.ndarray:
        return np.diag(self.coupling[i][i]).copy()

    def beta(self, i) -> np.ndarray:
        block = self.coupling[i][i].copy()
        np.fill_diagonal(block, 0.0)
        return block

    def gamma(self, i, j) -> np.ndarray:
        return np.diag(self.coupling[i][j]).copy()

    def eta(self, i, j) -> np.ndarray:
        block = self.coupling[i][j].copy()
        np.fill_diagonal(block, 0.0)
        return block


def synthesize_ginod(z_nominal, table: ValueTable, damping) -> GinodParams:
    """Build opinion-dynamics gains from value Hessians at the nominal opinions.

    ``damping`` is a scalar d (D_i = d I) or a per-agent list of
    per-option vectors.
    """
    n = len(z_nominal)
    coupling = tuple(
        tuple(-value_hessian_block(i, i, j, z_nominal, table) for j in range(n))
        for i in range(n)
    )
    if np.isscalar(damping):
        if damping <= 0:
            raise ValueError("damping must be positive")
        damp = tuple(float(damping) * np.ones(len(z)) for z in z_nominal)
    else:
        damp = tuple(np.asarray(d, dtype=float) for d in damping)
        for d in damp:
            if np.any(d <= 0):
                raise ValueError("damping must be positive")
    return GinodParams(coupling=coupling, damping=damp)


def ginod_rhs(params: GinodParams, dz_all, lam_all):
    """Saturated opinion-deviation dynamics.

    Per agent i and option l:
    -d_i dz_i[l] + lam_i * [ tanh(own/same-option drive at l)
                             + sum_{p != l} tanh(inter-option drive from p) ].
    dz = 0 is an exact equilibrium.
    """
    out = []
    for i, row in enumerate(params.coupling):
        # drive[l, p]: contribution of option p (all agents) to option l
        drive = sum(block * np.asarray(dz)[None, :] for block, dz in zip(row, dz_all))
        sat = np.tanh(drive)
        exchange = np.diag(sat) + (sat.sum(axis=1) - np.diag(sat))
        out.append(-params.damping[i] * np.asarray(dz_all[i], dtype=float)
                   + lam_all[i] * exchange)
    return out


def linearized_ginod_matrix(params: GinodParams, lam_all) -> np.ndarray:
    """Jacobian of the saturated dynamics at dz = 0: -D + diag(lam) x coupling."""
    counts = [len(d) for d in params.damping]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    M = np.zeros((offsets[-1], offsets[-1]))
    for i in range(len(counts)):
        sl_i = slice(offsets[i], offsets[i + 1])
        M[sl_i, sl_i] -= np.diag(params.damping[i])
        for j in range(len(counts)):
            sl_j = slice(offsets[j], offsets[j + 1])
            M[sl_i, sl_j] += lam_all[i] * params.coupling[i][j]
    return M


def price_of_indecision(player, z_all, table: ValueTable) -> float:
    """Worst-case-over-opponents ratio of averaged to best committed value.

    Values are shifted so the table minimum maps to 1 (keeping the
    ordering while making the ratio well defined for arbitrary-sign
    values), and the result is clamped below at 1.
    """
    v = table.values[player]
    shifted = v - v.min() + 1.0
    sig = softmax(z_all[player])
    axis = player
    other_counts = [c for ax, c in enumerate(v.shape) if ax != axis]
    best = 1.0
    for combo in np.ndindex(*other_counts):
        idx = list(combo)
        idx.insert(axis, slice(None))
        col = shifted[tuple(idx)]
        den = float(col.min())
        if den <= 0:
            raise ValueError("nonpositive committed value after offsetting")
        best = max(best, float(sig @ col) / den)
    return best


def attention_rhs(lam, poi, m, rho) -> float:
    """Damped attention dynamics forced by the price of indecision."""
    if m <= 0 or rho <= 0:
        raise ValueError("attention parameters must be positive")
    return -m * lam + rho * (poi - 1.0)


@dataclass(frozen=True)
class OpinionState:
    """Nominal opinions and deviations; full opinions are z = zbar + dz."""

    zbar: tuple
    dz: tuple

    @property
    def z(self) -> tuple:
        return tuple(zb + d for zb, d in zip(self.zbar, self.dz))

    def reset_nominal(self) -> "OpinionState":
        """Move the nominal to the current opinion, keeping the deviation."""
        return OpinionState(zbar=self.z, dz=self.dz)


@dataclass(frozen=True)
class AttentionState:
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))


def integrate_opinions(state: OpinionState, attention: AttentionState,
                       params: GinodParams, poi_all, dt, m, rho,
                       lam_max=float("inf"), substeps: int = 1):
    """Advance the opinion and attention dynamics by one step of ``dt``.

    Forward Euler, optionally with ``substeps`` internal stages of
    ``dt / substeps``: the synthesized gains scale with the game values
    and can make a plain dt-sized explicit step unstable, which shows up
    as sign-flipping deviations rather than opinion formation.
    Attention is clamped at zero (and optionally above at ``lam_max``);
    the full opinion is recomputed from the unchanged nominal.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    h = dt / substeps
    dz = [np.asarray(d, dtype=float).copy() for d in state.dz]
    lam = attention.lam.copy()
    for _ in range(substeps):
        rhs = ginod_rhs(params, dz, lam)
        dz = [d + h * r for d, r in zip(dz, rhs)]
        lam = np.clip(
            np.array([
                l + h * attention_rhs(l, poi, m, rho)
                for l, poi in zip(lam, poi_all)
            ]),
            0.0, lam_max,
        )
    return (OpinionState(zbar=state.zbar, dz=tuple(dz)),
            AttentionState(lam=lam))


def simulate_ginod(params: GinodParams, dz0, lam_all, dt, steps) -> np.ndarray:
    """Roll the deviation dynamics forward with fixed attention.

    Returns the stacked deviation trajectory, shape (steps + 1, total).
    """
    counts = [len(d) for d in params.damping]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    dz = [np.asarray(dz0[i], dtype=float).copy() for i in range(len(counts))]
    out = np.empty((steps + 1, offsets[-1]))
    out[0] = np.concatenate(dz)
    for k in range(steps):
        rhs = ginod_rhs(params, dz, lam_all)
        dz = [d + dt * r for d, r in zip(dz, rhs)]
        out[k + 1] = np.concatenate(dz)
    return out
