"""Planning factor graph and its compound-node chain form.

Every factor is a weighted least-squares term ``0.5 * r(x)^T W r(x)`` over one
state or two consecutive states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .environment import SignedDistanceField
from .errors import GraphStructureError, InvalidArgumentError
from .gp_prior import (
    GPPriorModel,
    Trajectory,
    interpolation_matrices,
    process_noise_cov,
    transition_matrix,
)
from .kinematics import RobotModel, forward_kinematics, sphere_jacobians


def obstacle_cost_vector(model: RobotModel, sdf: SignedDistanceField, q, eps: float):
    """Per-sphere hinge cost and its Jacobian w.r.t. the configuration.

    Returns ``(h, H)`` with ``h`` of length ``n_spheres`` and ``H`` of shape
    ``(n_spheres, d_cfg)``. Points outside the grid count as free space.
    """
    if eps < 0:
        raise InvalidArgumentError(f"eps must be non-negative, got {eps}")
    if model.kind == "point":
        qx, qy = np.asarray(q, dtype=float).ravel().tolist()
        hit = sdf.query_point(model.base_pose[0] + qx, model.base_pose[1] + qy)
        h = np.zeros(1)
        jac = np.zeros((1, 2))
        if hit is not None:
            d = hit[0] - model.body_spheres[0].radius
            if d <= eps:
                h[0] = eps - d
                jac[0] = (-hit[1], -hit[2])
        return h, jac
    fk = forward_kinematics(model, q)
    n = len(fk)
    h = np.zeros(n)
    jac = np.zeros((n, model.d_cfg))
    for s, ((center, fk_jac), sphere) in enumerate(zip(fk, model.body_spheres)):
        hit = sdf.query_point(center[0], center[1])
        if hit is None:
            continue
        d = hit[0] - sphere.radius
        if d <= eps:
            h[s] = eps - d
            jac[s] = -(hit[1] * fk_jac[0] + hit[2] * fk_jac[1])
    return h, jac


def obstacle_costs_batch(model: RobotModel, sdf: SignedDistanceField, q, eps: float):
    """``obstacle_cost_vector`` over a batch ``q`` of shape ``(M, d_cfg)``.

    Returns ``h`` of shape ``(M, n_spheres)`` and ``H`` of shape
    ``(M, n_spheres, d_cfg)``.
    """
    if eps < 0:
        raise InvalidArgumentError(f"eps must be non-negative, got {eps}")
    centers, jac = sphere_jacobians(model, q)
    dist, grad = sdf.query_many(centers)
    d = dist - model.radii
    active = d <= eps
    h = np.where(active, eps - d, 0.0)
    hq = -np.einsum("msk,mskd->msd", grad, jac) * active[..., None]
    return h, hq


def interp_obstacle_cost(x_i, x_j, dt, tau, model, sdf, eps):
    """Hinge cost at the GP-interpolated state between ``x_i`` and ``x_j``.

    Returns ``(h, J_i, J_j)``; Jacobians are w.r.t. the full states.
    """
    if not 0.0 < tau < dt:
        raise InvalidArgumentError(f"tau={tau} must lie strictly inside (0, {dt})")
    lam, psi = interpolation_matrices(dt, tau, model.d_cfg)
    return _interp_cost(np.asarray(x_i, float), np.asarray(x_j, float), lam, psi, model, sdf, eps)


def _interp_cost(x_i, x_j, lam, psi, model, sdf, eps):
    d = model.d_cfg
    x = lam[:d] @ x_i + psi[:d] @ x_j
    h, hq = obstacle_cost_vector(model, sdf, x, eps)
    if not hq.any():
        zero = np.zeros((h.size, x_i.size))
        return h, zero, zero.copy()
    return h, hq @ lam[:d], hq @ psi[:d]


class Factor:
    """Base least-squares factor. Subclasses implement ``linearize``."""

    kind = ""
    # hinge factors are usually inactive: zero residual and zero Jacobian
    hinge = False
    # affine residual, so the Gauss-Newton quadratic is exact
    linear = False

    def __init__(self, keys, information):
        self.keys = tuple(int(k) for k in keys)
        self.information = np.atleast_2d(np.asarray(information, dtype=float))

    def linearize(self, *xs):
        """Return ``(residual, [jacobian per key])`` at the given states."""
        raise NotImplementedError

    def residual(self, *xs):
        return self.linearize(*xs)[0]

    def quadratic(self, *xs):
        """Gauss-Newton ``(A, b, c)`` over the stacked arguments, absolute coordinates.

        ``None`` for a hinge factor that is inactive at ``xs``.
        """
        r, jacs = self.linearize(*xs)
        if inactive(self, r, jacs):
            return None
        jac = np.hstack(jacs) if len(jacs) > 1 else jacs[0]
        e = r - jac @ np.concatenate(xs)
        wj = self.information @ jac
        return jac.T @ wj, -(wj.T @ e), 0.5 * float(e @ self.information @ e)

    def cost(self, *xs) -> float:
        r = self.residual(*xs)
        return 0.5 * float(r @ self.information @ r)

    def __repr__(self):
        return f"{type(self).__name__}(keys={self.keys})"


def inactive(f: Factor, r, jacs) -> bool:
    """True for a hinge factor contributing nothing at this linearization."""
    return f.hinge and not r.any() and not any(j.any() for j in jacs)


class _LinearFactor(Factor):
    """Affine residual: the Gauss-Newton quadratic is exact and the same everywhere."""

    _quad = None
    linear = True

    def quadratic(self, *xs):
        if self._quad is None:
            self._quad = super().quadratic(*(np.zeros_like(x) for x in xs))
        return self._quad


class AnchorFactor(_LinearFactor):
    """``x - mean`` weighted by ``cov^-1``; kind ``anchor`` at the endpoints, ``prior`` inside."""

    def __init__(self, key, mean, cov, kind="anchor"):
        super().__init__((key,), np.linalg.inv(cov))
        self.mean = np.asarray(mean, dtype=float)
        self.kind = kind
        self._eye = np.eye(self.mean.size)

    def linearize(self, x):
        return x - self.mean, [self._eye]


class GPFactor(_LinearFactor):
    kind = "gp"

    def __init__(self, i, dt, qc):
        self.dt = float(dt)
        super().__init__((i, i + 1), np.linalg.inv(process_noise_cov(dt, qc)))
        dim = self.information.shape[0]
        self.phi = transition_matrix(dt, dim // 2)
        self._neg_eye = -np.eye(dim)

    def linearize(self, x_i, x_j):
        return self.phi @ x_i - x_j, [self.phi, self._neg_eye]


class ObstacleFactor(Factor):
    kind = "obstacle_unary"
    hinge = True

    def __init__(self, key, model, sdf, eps, sigma_obs):
        n = len(model.body_spheres)
        super().__init__((key,), np.eye(n) / sigma_obs**2)
        self.model, self.sdf, self.eps = model, sdf, float(eps)

    def linearize(self, x):
        d = self.model.d_cfg
        h, hq = obstacle_cost_vector(self.model, self.sdf, x[:d], self.eps)
        jac = np.zeros((h.size, 2 * d))
        jac[:, :d] = hq
        return h, [jac]


class InterpObstacleFactor(Factor):
    kind = "obstacle_interp"
    hinge = True

    def __init__(self, i, dt, tau, model, sdf, eps, sigma_obs):
        if not 0.0 < tau < dt:
            raise InvalidArgumentError(f"tau={tau} must lie strictly inside (0, {dt})")
        n = len(model.body_spheres)
        super().__init__((i, i + 1), np.eye(n) / sigma_obs**2)
        self.dt, self.tau = float(dt), float(tau)
        self.model, self.sdf, self.eps = model, sdf, float(eps)
        self.lam, self.psi = interpolation_matrices(dt, tau, model.d_cfg)

    def linearize(self, x_i, x_j):
        h, j_i, j_j = _interp_cost(x_i, x_j, self.lam, self.psi, self.model, self.sdf, self.eps)
        return h, [j_i, j_j]


class _Reversed(Factor):
    """Presents a binary factor stored as ``(j, i)`` with ``j > i`` in ascending key order."""

    def __init__(self, inner):
        super().__init__(inner.keys[::-1], inner.information)
        self.inner = inner
        self.kind = inner.kind
        self.hinge = inner.hinge
        self.linear = inner.linear

    def linearize(self, x_i, x_j):
        r, (a, b) = self.inner.linearize(x_j, x_i)
        return r, [b, a]

    def quadratic(self, x_i, x_j):
        quad = self.inner.quadratic(x_j, x_i)
        if quad is None:
            return None
        a, b, c = quad
        n = x_j.size
        perm = np.r_[np.arange(n, n + x_i.size), np.arange(n)]
        return a[np.ix_(perm, perm)], b[perm], c


@dataclass
class FactorGraph:
    num_states: int
    factors: List[Factor]

    def objective(self, states) -> float:
        total = 0.0
        for f in self.factors:
            total += f.cost(*(states[k] for k in f.keys))
        return total

    def census(self) -> dict:
        out = {}
        for f in self.factors:
            out[f.kind] = out.get(f.kind, 0) + 1
        return out


def assemble_graph(
    prior: GPPriorModel,
    traj: Trajectory,
    model: RobotModel,
    sdf: SignedDistanceField,
    n_ip: int,
    eps: float,
    sigma_obs: float,
) -> FactorGraph:
    """Anchors, interior priors, GP factors, unary and interpolated obstacle factors.

    ``traj`` fixes the time grid; interior prior means follow the straight
    line between ``prior.start_mean`` and ``prior.goal_mean``.
    """
    if n_ip < 0:
        raise InvalidArgumentError(f"n_ip must be >= 0, got {n_ip}")
    if not sigma_obs > 0:
        raise InvalidArgumentError(f"sigma_obs must be positive, got {sigma_obs}")
    if traj.d_cfg != model.d_cfg or prior.d_cfg != model.d_cfg:
        raise InvalidArgumentError("prior, trajectory and robot dimensions disagree")
    n = traj.n_intervals
    mean = prior.mean_trajectory(n, traj.total_time).states
    factors: List[Factor] = [
        AnchorFactor(0, prior.start_mean, prior.anchor_cov),
        AnchorFactor(n, prior.goal_mean, prior.anchor_cov),
    ]
    if prior.mid_cov is not None:
        for i in range(1, n):
            factors.append(AnchorFactor(i, mean[i], prior.mid_cov, kind="prior"))
    for i in range(n):
        factors.append(GPFactor(i, traj.times[i + 1] - traj.times[i], prior.qc))
    for i in range(n + 1):
        factors.append(ObstacleFactor(i, model, sdf, eps, sigma_obs))
    for i in range(n):
        dt = traj.times[i + 1] - traj.times[i]
        for j in range(1, n_ip + 1):
            factors.append(InterpObstacleFactor(i, dt, j * dt / (n_ip + 1), model, sdf, eps, sigma_obs))
    return FactorGraph(n + 1, factors)


def _isotropic_weight(f: Factor) -> Optional[float]:
    info = f.information
    w = float(info[0, 0])
    return w if np.array_equal(info, w * np.eye(info.shape[0])) else None


class ObstacleBatch:
    """Hinge obstacle factors of one chain evaluated together.

    Unary factors read the configuration of state ``i``; interpolated factors
    read it through the GP interpolation rows of ``(x_i, x_{i+1})``. All
    factors share the robot, distance field and ``eps`` and have isotropic
    weights.
    """

    def __init__(self, unary: Sequence["ObstacleFactor"], interp: Sequence["InterpObstacleFactor"]):
        ref = (list(unary) + list(interp))[0]
        self.model, self.sdf, self.eps = ref.model, ref.sdf, ref.eps
        d = self.model.d_cfg
        self.d = d
        self.u_idx = np.array([f.keys[0] for f in unary], dtype=int)
        self.u_w = np.array([_isotropic_weight(f) for f in unary], dtype=float)
        self.e_idx = np.array([f.keys[0] for f in interp], dtype=int)
        self.e_w = np.array([_isotropic_weight(f) for f in interp], dtype=float)
        self.e_lam = np.array([f.lam[:d] for f in interp]).reshape(-1, d, 2 * d)
        self.e_psi = np.array([f.psi[:d] for f in interp]).reshape(-1, d, 2 * d)

    @staticmethod
    def accepts(f: Factor, ref: Optional[Factor]) -> bool:
        if type(f) not in (ObstacleFactor, InterpObstacleFactor) or _isotropic_weight(f) is None:
            return False
        return ref is None or (f.model is ref.model and f.sdf is ref.sdf and f.eps == ref.eps)

    def _evaluate(self, x):
        d = self.d
        q_u = x[self.u_idx, :d]
        q_e = (np.einsum("mdk,mk->md", self.e_lam, x[self.e_idx])
               + np.einsum("mdk,mk->md", self.e_psi, x[self.e_idx + 1]))
        h, hq = obstacle_costs_batch(self.model, self.sdf, np.vstack([q_u, q_e]), self.eps)
        n_u = len(self.u_idx)
        return h[:n_u], hq[:n_u], h[n_u:], hq[n_u:]

    def cost(self, x) -> float:
        h_u, _, h_e, _ = self._evaluate(x)
        return 0.5 * float(self.u_w @ np.sum(h_u**2, axis=1) + self.e_w @ np.sum(h_e**2, axis=1))

    def quadratics(self, x):
        """Per-state ``(A, b, c)`` and per-edge ``(A, b, c)`` sums, as stacked arrays."""
        n, dim = x.shape
        d = self.d
        h_u, hq_u, h_e, hq_e = self._evaluate(x)
        a_u = np.zeros((n, dim, dim))
        b_u = np.zeros((n, dim))
        c_u = np.zeros(n)
        if len(self.u_idx):
            jac = np.zeros(hq_u.shape[:2] + (dim,))
            jac[..., :d] = hq_u
            _accumulate(a_u, b_u, c_u, self.u_idx, self.u_w, h_u, jac, x[self.u_idx])
        a_e = np.zeros((max(n - 1, 0), 2 * dim, 2 * dim))
        b_e = np.zeros((max(n - 1, 0), 2 * dim))
        c_e = np.zeros(max(n - 1, 0))
        if len(self.e_idx):
            jac = np.concatenate(
                [np.einsum("msd,mdk->msk", hq_e, self.e_lam), np.einsum("msd,mdk->msk", hq_e, self.e_psi)],
                axis=-1,
            )
            z = np.concatenate([x[self.e_idx], x[self.e_idx + 1]], axis=1)
            _accumulate(a_e, b_e, c_e, self.e_idx, self.e_w, h_e, jac, z)
        return (a_u, b_u, c_u), (a_e, b_e, c_e)


def _accumulate(a, b, c, idx, w, h, jac, z):
    e = h - np.einsum("msk,mk->ms", jac, z)
    np.add.at(a, idx, w[:, None, None] * np.einsum("msk,msl->mkl", jac, jac))
    np.add.at(b, idx, -w[:, None] * np.einsum("msk,ms->mk", jac, e))
    np.add.at(c, idx, 0.5 * w * np.sum(e**2, axis=1))


@dataclass
class CompoundGraph:
    """Chain of self-potentials ``phi[i]`` and edge-potentials ``psi[i]`` on ``(i, i+1)``.

    ``phi``/``psi`` evaluate factor by factor; ``objective`` and ``linearize``
    evaluate the hinge obstacle factors of the whole chain in one batch.
    """

    self_potentials: List[List[Factor]]
    edge_potentials: List[List[Factor]]

    def __post_init__(self):
        ref = None
        unary, interp = [], []
        self._rest_self = [[] for _ in self.self_potentials]
        self._rest_edge = [[] for _ in self.edge_potentials]
        for i, fs in enumerate(self.self_potentials):
            for f in fs:
                if ObstacleBatch.accepts(f, ref):
                    ref = ref or f
                    unary.append(f)
                else:
                    self._rest_self[i].append(f)
        for i, fs in enumerate(self.edge_potentials):
            for f in fs:
                if ObstacleBatch.accepts(f, ref) and f.keys == (i, i + 1):
                    ref = ref or f
                    interp.append(f)
                else:
                    self._rest_edge[i].append(f)
        self._batch = ObstacleBatch(unary, interp) if (unary or interp) else None

    @property
    def num_states(self) -> int:
        return len(self.self_potentials)

    def phi(self, i, x) -> float:
        return sum(f.cost(x) for f in self.self_potentials[i])

    def psi(self, i, x_i, x_j) -> float:
        return sum(f.cost(x_i, x_j) for f in self.edge_potentials[i])

    def objective(self, states) -> float:
        x = np.asarray(states, dtype=float)
        total = self._batch.cost(x) if self._batch is not None else 0.0
        for i, fs in enumerate(self._rest_self):
            total += sum(f.cost(x[i]) for f in fs)
        for i, fs in enumerate(self._rest_edge):
            total += sum(f.cost(x[i], x[i + 1]) for f in fs)
        return total

    def linearize(self, states):
        """Gauss-Newton quadratics ``(A, b, c)`` of every ``phi[i]`` and every ``psi[i]`` at ``states``."""
        x = np.asarray(states, dtype=float)
        n, dim = x.shape
        if self._batch is not None:
            (a_u, b_u, c_u), (a_e, b_e, c_e) = self._batch.quadratics(x)
        else:
            a_u, b_u, c_u = np.zeros((n, dim, dim)), np.zeros((n, dim)), np.zeros(n)
            m = max(n - 1, 0)
            a_e, b_e, c_e = np.zeros((m, 2 * dim, 2 * dim)), np.zeros((m, 2 * dim)), np.zeros(m)
        unary = []
        for i, fs in enumerate(self._rest_self):
            a, b, c = linearize_factors(fs, [x[i]])
            unary.append((a_u[i] + a, b_u[i] + b, c_u[i] + c))
        edges = []
        for i, fs in enumerate(self._rest_edge):
            a, b, c = linearize_factors(fs, [x[i], x[i + 1]])
            edges.append((a_e[i] + a, b_e[i] + b, c_e[i] + c))
        return unary, edges


def compound_transform(g: FactorGraph) -> CompoundGraph:
    """Merge unary factors per state and binary factors per consecutive pair."""
    phis = [[] for _ in range(g.num_states)]
    psis = [[] for _ in range(max(g.num_states - 1, 0))]
    for f in g.factors:
        if any(not 0 <= k < g.num_states for k in f.keys):
            raise GraphStructureError(f"{f!r} references a state outside [0, {g.num_states - 1}]")
        if len(f.keys) == 1:
            phis[f.keys[0]].append(f)
        elif len(f.keys) == 2:
            i, j = f.keys
            if abs(i - j) != 1:
                raise GraphStructureError(f"{f!r} connects non-consecutive states {i} and {j}")
            if j < i:
                f = _Reversed(f)
            psis[min(i, j)].append(f)
        else:
            raise GraphStructureError(f"{f!r} has {len(f.keys)} variables")
    return CompoundGraph(phis, psis)


def linearize_factors(factors: Sequence[Factor], points: Sequence[np.ndarray]):
    """Gauss-Newton quadratic ``(A, b, c)`` of a factor sum over the stacked ``points``.

    All factors must share the same keys, in the order matching ``points``. The
    quadratic ``0.5 x^T A x - b^T x + c`` is in absolute coordinates.
    """
    dim = sum(p.size for p in points)
    a = np.zeros((dim, dim))
    b = np.zeros(dim)
    c = 0.0
    for f in factors:
        quad = f.quadratic(*points)
        if quad is None:
            continue
        a += quad[0]
        b += quad[1]
        c += quad[2]
    return a, b, c


def residual_sum(factors: Sequence[Factor], points) -> float:
    return sum(f.cost(*points) for f in factors)
