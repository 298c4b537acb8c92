"""Online execution of the sufficient statistics.

Three statistics appear here:

* ``stat``: the conditional mean of (X_t, carrier_t) given the shared data
  and the coordinator's past actions.  It is the projection of the full
  augmented-state estimate, recoverable through the lifting map because the
  estimate of Y_t is C_t times the estimate of X_t.
* the plant-level one-step-ahead Kalman predictor, whose covariance never
  reads the local gains (strategy independent, precomputable);
* the delayed-sharing statistic S_t = (xhat, recent coordinator actions,
  recent shared observation/action pairs), with windows padded by zeros
  before the pipeline fills; ``stat`` is an explicit linear function of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (DEFAULT_RTOL, DimMismatch, TimeOutOfRange,
                   UnsupportedProtocol, as_vector, pinv, sym)
from .coordination import CoordinatedSystem
from .infostructure import token_trace
from .plant import PlantModel
from .solver import SolvedStrategy


# --------------------------------------------------------------------------
# shared-information statistic


@dataclass(frozen=True)
class EstimatorState:
    """Value of the reduced statistic at time t (dim d_x + d_carrier)."""

    t: int
    stat: np.ndarray


def initial_state(cs: CoordinatedSystem) -> EstimatorState:
    return EstimatorState(1, np.zeros(cs.d_x + cs.d_c))


def statistic_transition(ss: SolvedStrategy, t: int):
    """Matrices (Ts, Tu, Tz) with stat_{t+1} = Ts stat_t + Tu Ut~ + Tz Z_t."""
    cs = ss.cs
    if not 1 <= t < cs.T:
        raise TimeOutOfRange(f"no transition out of t={t} (T={cs.T})")
    lift, proj = cs.lift(t), cs.proj()
    gain = ss.filter_gain[t - 1]
    Ts = proj @ (cs.A_at(t) - gain @ cs.C_at(t + 1)) @ lift
    Tu = proj @ (cs.B_at(t) - gain @ cs.D_at(t + 1))
    Tz = proj @ gain
    return Ts, Tu, Tz


def step_statistic(st: EstimatorState, ss: SolvedStrategy, z_new,
                   u_tilde_prev) -> EstimatorState:
    """Advance the statistic with the newly shared increment Z_t.

    Equals the (X, carrier) projection of the full augmented-state filter
    update applied to the lifted statistic.
    """
    cs = ss.cs
    z = as_vector(z_new, cs.d_z, "z_new")
    u = as_vector(u_tilde_prev, cs.d_u, "u_tilde_prev")
    Ts, Tu, Tz = statistic_transition(ss, st.t)
    return EstimatorState(st.t + 1, Ts @ st.stat + Tu @ u + Tz @ z)


def act(st: EstimatorState, ss: SolvedStrategy, y_local, m_local):
    """Per-controller actions U^i_t = L~^i_t stat + G^i_t Y^i_t + H^i_t M^i_t."""
    p = ss.cs.plant
    if len(y_local) != p.n or len(m_local) != p.n:
        raise DimMismatch("need one local observation and memory per controller")
    return [ss.local_action(i, st.t, st.stat,
                            as_vector(y_local[i], p.d_y[i], f"y[{i}]"),
                            as_vector(m_local[i], None, f"m[{i}]"))
            for i in range(p.n)]


# --------------------------------------------------------------------------
# plant-level Kalman predictor (strategy independent)


def plant_kalman_covariances(plant: PlantModel, rtol: float = DEFAULT_RTOL):
    """Predictor covariances P_1..P_{T+1} and gains for t = 1..T.

    P_1 = sigma_x; the innovation covariance C P C' + sigma_w is inverted
    tolerantly so singular observation noise is handled.
    """
    sigma_w = plant.stacked_sigma_w()
    P = [plant.sigma_x]
    gains = []
    for t in range(1, plant.T + 1):
        A, C = plant.A_at(t), plant.stacked_c(t)
        Pt = P[-1]
        gain = A @ Pt @ C.T @ pinv(sym(C @ Pt @ C.T + sigma_w), rtol)
        P.append(sym(A @ Pt @ A.T + plant.sigma_w0 - gain @ (C @ Pt @ A.T)))
        gains.append(gain)
    return tuple(P), tuple(gains)


@dataclass(frozen=True)
class PlantKalmanState:
    """One-step-ahead predictor xhat_{t|t-1}."""

    t: int
    xhat: np.ndarray


def plant_kalman_init(plant: PlantModel) -> PlantKalmanState:
    return PlantKalmanState(1, np.zeros(plant.d_x))


def plant_kalman_step(plant: PlantModel, state: PlantKalmanState, y, u,
                      gains) -> PlantKalmanState:
    """Consume (Y_t, U_t) and predict xhat_{t+1|t}."""
    t = state.t
    if not 1 <= t <= plant.T:
        raise TimeOutOfRange(f"t={t} outside 1..{plant.T}")
    y = as_vector(y, plant.d_y_total, "y")
    u = as_vector(u, plant.d_u_total, "u")
    A, B, C = plant.A_at(t), plant.B_at(t), plant.stacked_c(t)
    xhat = A @ state.xhat + B @ u + gains[t - 1] @ (y - C @ state.xhat)
    return PlantKalmanState(t + 1, xhat)


# --------------------------------------------------------------------------
# delayed-sharing reduced statistic


def effective_delay(mp) -> int:
    """Window length parameter: k for symmetric sharing, k* for asymmetric."""
    if mp.kind == "symmetric_delay":
        return int(mp.delay)
    if mp.kind == "asymmetric_delay":
        return mp.delay_graph.k_star_max
    raise UnsupportedProtocol(
        f"delayed-sharing statistic needs a delayed-sharing protocol, "
        f"got kind={mp.kind!r}")


@dataclass(frozen=True)
class ReducedDelayStat:
    """S_t = (xhat_{t-k+1|t-k}, Ut~ window, Y window, U window).

    Windows hold k - 1 entries each, oldest first, zero padded before the
    pipeline fills (empty for k = 1).
    """

    k: int
    xhat: np.ndarray
    u_tilde_window: tuple[np.ndarray, ...]
    y_window: tuple[np.ndarray, ...]
    u_window: tuple[np.ndarray, ...]

    def vector(self) -> np.ndarray:
        parts = ([self.xhat] + list(self.u_tilde_window)
                 + list(self.y_window) + list(self.u_window))
        return np.concatenate(parts) if parts else np.zeros(0)


def delay_stat_dim(plant: PlantModel, k: int) -> int:
    return plant.d_x + (k - 1) * (2 * plant.d_u_total + plant.d_y_total)


@dataclass(frozen=True)
class DelayedStatTracker:
    """Pure-value runtime for S_t; ``advance`` returns the next tracker.

    The k-1 newest shared pairs ride in a delay line until they become
    common knowledge, at which point they enter the plant predictor and the
    windows.  The predictor covariance is precomputed and never touches the
    local gains.
    """

    plant: PlantModel
    k: int
    t: int
    kalman: PlantKalmanState
    kalman_gains: tuple[np.ndarray, ...]
    pending: tuple          # (y_s, u_s) pairs for s = t-k+1..t-1; None = pad
    u_tilde_window: tuple[np.ndarray, ...]
    y_window: tuple[np.ndarray, ...]
    u_window: tuple[np.ndarray, ...]

    @staticmethod
    def create(plant: PlantModel, mp, rtol: float = DEFAULT_RTOL
               ) -> "DelayedStatTracker":
        k = effective_delay(mp)
        _, gains = plant_kalman_covariances(plant, rtol)
        pad_u = np.zeros(plant.d_u_total)
        pad_y = np.zeros(plant.d_y_total)
        return DelayedStatTracker(
            plant=plant, k=k, t=1, kalman=plant_kalman_init(plant),
            kalman_gains=gains, pending=(None,) * (k - 1),
            u_tilde_window=(pad_u,) * (k - 1),
            y_window=(pad_y,) * (k - 1), u_window=(pad_u,) * (k - 1))

    def stat(self) -> ReducedDelayStat:
        return ReducedDelayStat(self.k, self.kalman.xhat,
                                self.u_tilde_window, self.y_window,
                                self.u_window)

    def advance(self, y_t, u_t, u_tilde_t) -> "DelayedStatTracker":
        """Move from time t to t+1 after acting (Y_t, U_t, Ut~ realized)."""
        y_t = as_vector(y_t, self.plant.d_y_total, "y_t")
        u_t = as_vector(u_t, self.plant.d_u_total, "u_t")
        u_tilde_t = as_vector(u_tilde_t, self.plant.d_u_total, "u_tilde_t")
        queue = self.pending + ((y_t, u_t),)
        ripe, queue = queue[0], queue[1:]
        kal = self.kalman
        y_win, u_win = self.y_window, self.u_window
        if ripe is None:
            y_win = y_win[1:] + (np.zeros(self.plant.d_y_total),) if y_win else y_win
            u_win = u_win[1:] + (np.zeros(self.plant.d_u_total),) if u_win else u_win
        else:
            kal = plant_kalman_step(self.plant, kal, ripe[0], ripe[1],
                                    self.kalman_gains)
            if y_win:
                y_win = y_win[1:] + (ripe[0],)
                u_win = u_win[1:] + (ripe[1],)
        ut_win = self.u_tilde_window
        if ut_win:
            ut_win = ut_win[1:] + (u_tilde_t,)
        return DelayedStatTracker(
            plant=self.plant, k=self.k, t=self.t + 1, kalman=kal,
            kalman_gains=self.kalman_gains, pending=queue,
            u_tilde_window=ut_win, y_window=y_win, u_window=u_win)


def delayed_stat_map(cs: CoordinatedSystem, k: int, t: int) -> np.ndarray:
    """Matrix taking the delayed statistic S_t to stat at time t.

    Built constructively: rebuild the augmented-state estimate at time
    t - k + 1 out of S_t (the X part from xhat, the Y part through C, the
    carrier slots matched to window entries by symbolic tokens), then
    propagate the coordinated dynamics with the windowed coordinator actions
    and zero-mean noise, and project back to (X, carrier).
    """
    mp = cs.protocol
    if mp.kind not in ("symmetric_delay", "asymmetric_delay"):
        raise UnsupportedProtocol(
            f"delayed-statistic map needs a delayed-sharing protocol, got {mp.kind!r}")
    if mp.kind == "asymmetric_delay":
        # the construction conditions the delayed state estimate on data up
        # to t - k*; if some controller's data becomes common sooner, the
        # shared history holds fresher information than the statistic's
        # windows and the exact statistic is not a function of them
        kstars = {mp.delay_graph.k_star(j) for j in range(mp.n)}
        if len(kstars) > 1:
            raise UnsupportedProtocol(
                "delayed-statistic map needs equal worst-case delays; "
                f"graph has k*_j in {sorted(kstars)}")
    if k != effective_delay(mp):
        raise UnsupportedProtocol(
            f"window delay {k} does not match the protocol's {effective_delay(mp)}")
    plant = cs.plant
    if not 1 <= t <= plant.T:
        raise TimeOutOfRange(f"t={t} outside 1..{plant.T}")
    d_x, d_u, d_y = plant.d_x, plant.d_u_total, plant.d_y_total
    dim_s = delay_stat_dim(plant, k)
    tau = t - k + 1

    # column offsets inside S_t
    def ut_col(s):        # coordinator action at time s, s = tau..t-1
        return d_x + (s - tau) * d_u

    y0 = d_x + (k - 1) * d_u

    def y_col(s):         # shared observation at time s, s = t-2k+2..t-k
        return y0 + (s - (t - 2 * k + 2)) * d_y

    u0 = y0 + (k - 1) * d_y

    def u_col(s):
        return u0 + (s - (t - 2 * k + 2)) * d_u

    if tau >= 1:
        trace = token_trace(mp)
        reorder = np.zeros((cs.d_c, dim_s))
        for r, tok in enumerate(trace.carrier[tau]):
            if tok is None:
                continue
            kind, i, s, comp = tok
            if kind == "y":
                reorder[r, y_col(s) + sum(plant.d_y[:i]) + comp] = 1.0
            else:
                reorder[r, u_col(s) + sum(plant.d_u[:i]) + comp] = 1.0
        base = np.zeros((d_x + cs.d_c, dim_s))
        base[:d_x, :d_x] = np.eye(d_x)
        base[d_x:, :] = reorder
        emap = cs.lift(tau) @ base
        start = tau
    else:
        # before the pipeline fills the delayed estimate is zero
        emap = np.zeros((cs.d_state, dim_s))
        start = 1
    for s in range(start, t):
        sel = np.zeros((d_u, dim_s))
        sel[:, ut_col(s):ut_col(s) + d_u] = np.eye(d_u)
        emap = cs.A_at(s) @ emap + cs.B_at(s) @ sel
    return cs.proj() @ emap


def delayed_stat_gains(ss: SolvedStrategy, k: int):
    """Gains acting directly on S_t: L_t = L~_t M_map(t)."""
    return tuple(ss.Lgain[t - 1] @ delayed_stat_map(ss.cs, k, t)
                 for t in range(1, ss.cs.T + 1))
