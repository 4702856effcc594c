"""Constant-velocity Gaussian-process trajectory prior.

States are flat arrays ``[position, velocity]`` of length ``D = 2 * d_cfg``.
The prior is the white-noise-on-acceleration model: between support times the
position is a doubly integrated white noise with power spectral density ``qc``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError


def split_state(x):
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] // 2
    return x[..., :d], x[..., d:]


def make_state(position, velocity):
    position = np.asarray(position, dtype=float).ravel()
    velocity = np.asarray(velocity, dtype=float).ravel()
    if position.shape != velocity.shape:
        raise InvalidArgumentError(
            f"position has {position.size} entries but velocity has {velocity.size}"
        )
    return np.concatenate([position, velocity])


@dataclass(frozen=True)
class Trajectory:
    """Support states ``states[i]`` at ``times[i]``; shape ``(N+1, D)``."""

    states: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        times = np.array(self.times, dtype=float).ravel()
        if states.ndim != 2 or states.shape[1] % 2:
            raise InvalidArgumentError("states must be a (N+1, 2*d_cfg) array")
        if states.shape[0] != times.size or times.size < 2:
            raise InvalidArgumentError("need at least two states, one time per state")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise InvalidArgumentError("states must be finite")
        states.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "times", times)

    @property
    def num_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.states.shape[0] - 1

    @property
    def d_cfg(self) -> int:
        return self.states.shape[1] // 2

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, : self.d_cfg]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, self.d_cfg :]

    @property
    def total_time(self) -> float:
        return float(self.times[-1] - self.times[0])

    def with_states(self, states) -> "Trajectory":
        return Trajectory(states, self.times)


def transition_matrix(dt: float, d_cfg: int) -> np.ndarray:
    """State transition ``[[I, dt I], [0, I]]`` of the constant-velocity model."""
    if dt < 0:
        raise InvalidArgumentError(f"dt must be non-negative, got {dt}")
    eye = np.eye(d_cfg)
    phi = np.eye(2 * d_cfg)
    phi[:d_cfg, d_cfg:] = dt * eye
    return phi


def _noise_cov(dt, qc):
    return np.block(
        [
            [dt**3 / 3.0 * qc, dt**2 / 2.0 * qc],
            [dt**2 / 2.0 * qc, dt * qc],
        ]
    )


def _check_spd(name, m):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1] or not np.allclose(m, m.T, rtol=1e-12, atol=1e-14):
        raise InvalidArgumentError(f"{name} must be a symmetric matrix")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise InvalidArgumentError(f"{name} must be positive definite") from None
    return m


def process_noise_cov(dt: float, qc) -> np.ndarray:
    """Covariance of the state increment over ``dt`` given acceleration PSD ``qc``."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    qc = _check_spd("qc", qc)
    return _noise_cov(dt, qc)


def prior_mean_trajectory(start, goal, n: int, total_time: float) -> Trajectory:
    """Straight constant-velocity line from ``start`` to ``goal`` over ``n`` intervals.

    Only the position halves of ``start`` and ``goal`` are used.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if total_time <= 0:
        raise InvalidArgumentError(f"total_time must be positive, got {total_time}")
    p0, _ = split_state(start)
    p1, _ = split_state(goal)
    if p0.shape != p1.shape:
        raise InvalidArgumentError("start and goal dimensions differ")
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    positions = (1.0 - s) * p0 + s * p1
    velocity = (p1 - p0) / total_time
    states = np.hstack([positions, np.tile(velocity, (n + 1, 1))])
    times = np.linspace(0.0, total_time, n + 1)
    return Trajectory(states, times)


def gp_factor_error(x_i, x_j, dt: float):
    """Residual ``Phi(dt) x_i - x_j`` with its Jacobians ``(Phi, -I)``."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    phi = transition_matrix(dt, x_i.size // 2)
    return phi @ x_i - x_j, phi, -np.eye(x_i.size)


def anchor_factor_error(x, mean) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if x.shape != mean.shape:
        raise InvalidArgumentError(f"state has shape {x.shape}, mean has {mean.shape}")
    return x - mean


def mahalanobis_cost(residual, cov) -> float:
    """``0.5 * r^T cov^-1 r``."""
    r = np.atleast_1d(np.asarray(residual, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    return 0.5 * float(r @ np.linalg.solve(cov, r))


def interpolation_matrices(dt: float, tau: float, d_cfg: int):
    """``(Lambda, Psi)`` such that ``x(tau) = Lambda x_i + Psi x_j``.

    The PSD cancels out of both matrices, so unit ``qc`` is used.
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if not 0.0 <= tau <= dt:
        raise InvalidArgumentError(f"tau={tau} outside [0, {dt}]")
    unit = np.eye(d_cfg)
    q_tau = _noise_cov(tau, unit)
    q_dt = _noise_cov(dt, unit)
    phi_rest = transition_matrix(dt - tau, d_cfg)
    psi = np.linalg.solve(q_dt.T, (q_tau @ phi_rest.T).T).T
    lam = transition_matrix(tau, d_cfg) - psi @ transition_matrix(dt, d_cfg)
    return lam, psi


def interpolate_state(x_i, x_j, dt: float, tau: float):
    """GP-interpolated state at ``tau`` after ``x_i``; returns ``(x, dx/dx_i, dx/dx_j)``."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    lam, psi = interpolation_matrices(dt, tau, x_i.size // 2)
    return lam @ x_i + psi @ x_j, lam, psi


def upsample(traj: Trajectory, factor: int) -> Trajectory:
    """Insert ``factor - 1`` GP-interpolated states inside every interval."""
    if factor < 1:
        raise InvalidArgumentError(f"upsample factor must be >= 1, got {factor}")
    states = [traj.states[0]]
    times = [traj.times[0]]
    d = traj.d_cfg
    for i in range(traj.n_intervals):
        dt = traj.times[i + 1] - traj.times[i]
        for k in range(1, factor + 1):
            if k == factor:
                states.append(traj.states[i + 1])
                times.append(traj.times[i + 1])
            else:
                lam, psi = interpolation_matrices(dt, dt * k / factor, d)
                states.append(lam @ traj.states[i] + psi @ traj.states[i + 1])
                times.append(traj.times[i] + dt * k / factor)
    return Trajectory(np.array(states), np.array(times))


@dataclass(frozen=True)
class GPPriorModel:
    """Prior parameters: acceleration PSD, endpoint means and factor covariances.

    ``mid_cov`` weights the unary prior pulling interior states toward the
    straight-line mean; ``None`` drops those factors.
    """

    qc: np.ndarray
    start_mean: np.ndarray
    goal_mean: np.ndarray
    anchor_cov: np.ndarray = field(default=None)
    mid_cov: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        qc = _check_spd("qc", self.qc)
        start = np.asarray(self.start_mean, dtype=float).ravel()
        goal = np.asarray(self.goal_mean, dtype=float).ravel()
        dim = 2 * qc.shape[0]
        if start.size != dim or goal.size != dim:
            raise InvalidArgumentError(
                f"start/goal means must have length {dim} for a {qc.shape[0]}-dof qc"
            )
        anchor = self.anchor_cov
        if anchor is None:
            anchor = 1e-8 * np.eye(dim)
        anchor = _check_spd("anchor_cov", anchor)
        mid = self.mid_cov
        if mid is not None:
            mid = _check_spd("mid_cov", mid)
        for name, value in (("qc", qc), ("start_mean", start), ("goal_mean", goal),
                            ("anchor_cov", anchor), ("mid_cov", mid)):
            object.__setattr__(self, name, value)

    @classmethod
    def create(cls, qc, start_mean, goal_mean, anchor_sigma=1e-4, mid_prior=True):
        """Defaults: anchors ``anchor_sigma^2 I``; interior prior ``max eig(qc) I``."""
        qc = np.atleast_2d(np.asarray(qc, dtype=float))
        dim = 2 * qc.shape[0]
        mid = None
        if mid_prior:
            mid = float(np.max(np.linalg.eigvalsh(qc))) * np.eye(dim)
        return cls(qc, start_mean, goal_mean, anchor_sigma**2 * np.eye(dim), mid)

    @property
    def d_cfg(self) -> int:
        return self.qc.shape[0]

    def mean_trajectory(self, n: int, total_time: float) -> Trajectory:
        return prior_mean_trajectory(self.start_mean, self.goal_mean, n, total_time)
