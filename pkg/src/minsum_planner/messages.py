"""Quadratic min-sum messages and the local Gauss-Newton node solver."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericalError
from .factors import Factor, inactive, linearize_factors

MAX_DAMPING = 1e12


@dataclass(frozen=True)
class QuadraticMessage:
    """``m(x) = 0.5 x^T L x - eta^T x + c``."""

    information_matrix: np.ndarray
    information_vector: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.information_matrix, dtype=float)
        object.__setattr__(self, "information_matrix", 0.5 * (lam + lam.T))
        object.__setattr__(self, "information_vector", np.asarray(self.information_vector, dtype=float))
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def _trusted(cls, lam, eta, c):
        """Build without the symmetrizing copy; ``lam`` must already be symmetric."""
        out = object.__new__(cls)
        object.__setattr__(out, "information_matrix", lam)
        object.__setattr__(out, "information_vector", eta)
        object.__setattr__(out, "constant", float(c))
        return out

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, dim)), np.zeros(dim), 0.0)

    @property
    def dim(self) -> int:
        return self.information_vector.size

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ self.information_matrix @ x) - float(self.information_vector @ x) + self.constant

    def __add__(self, other: "QuadraticMessage") -> "QuadraticMessage":
        return QuadraticMessage._trusted(
            self.information_matrix + other.information_matrix,
            self.information_vector + other.information_vector,
            self.constant + other.constant,
        )

    def gradient(self, x):
        return self.information_matrix @ x - self.information_vector

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.information_matrix)[0])

    def argmin(self):
        return np.linalg.solve(self.information_matrix, self.information_vector)


def total(messages: Sequence[QuadraticMessage], dim: int) -> QuadraticMessage:
    out = QuadraticMessage.zero(dim)
    for m in messages:
        out = out + m
    return out


def linearized_potential(factors: Sequence[Factor], x) -> QuadraticMessage:
    """Gauss-Newton quadratic of a unary factor sum around ``x``."""
    a, b, c = linearize_factors(factors, [np.asarray(x, dtype=float)])
    return QuadraticMessage(a, b, c)


@dataclass
class LocalSolve:
    x: np.ndarray
    value: float
    iterations: int
    accepted_values: list


def gauss_newton_local(
    factors: Sequence[Factor],
    x0,
    messages: Sequence[QuadraticMessage] = (),
    max_inner: int = 20,
    damping_init: float = 1e-4,
    grad_tol: float = 1e-9,
    node: Optional[int] = None,
    bind: Optional[Callable] = None,
    free_slot: int = 0,
) -> LocalSolve:
    """Minimize ``sum of factor costs + sum of quadratic messages`` over one state.

    ``bind(x)`` maps the free state to the argument tuple of every factor
    (default ``(x,)``), which lets binary factors be minimized over the
    argument in position ``free_slot`` with the other held fixed.
    Plain Gauss-Newton steps are tried first; on a step that would raise the
    objective, additive damping starts at ``damping_init`` and grows tenfold,
    shrinking tenfold again after each accepted step.
    """
    x = np.array(x0, dtype=float)
    dim = x.size
    quad = total(messages, dim)
    q_mat, q_vec, q_const = quad.information_matrix, quad.information_vector, quad.constant
    if bind is None:
        # unary linear factors are exact quadratics: fold them in once
        bind = lambda v: (v,)
        for f in factors:
            if f.linear:
                a, b, c = f.quadratic(x)
                q_mat, q_vec, q_const = q_mat + a, q_vec + b, q_const + c
        factors = [f for f in factors if not f.linear]
    eye = np.eye(dim)

    def evaluate(v):
        # objective, Gauss-Newton Hessian and gradient from one linearization
        args = bind(v) if factors else ()
        qv = q_mat @ v
        value = 0.5 * float(v @ qv) - float(q_vec @ v) + q_const
        hess = q_mat.copy()
        grad = qv - q_vec
        for f in factors:
            r, jacs = f.linearize(*args)
            if inactive(f, r, jacs):
                continue
            wr = f.information @ r
            value += 0.5 * float(r @ wr)
            jac = jacs[free_slot]
            hess += jac.T @ f.information @ jac
            grad += jac.T @ wr
        return value, hess, grad

    value, hess, grad = evaluate(x)
    if not (math.isfinite(value) and np.all(np.isfinite(hess)) and np.all(np.isfinite(grad))):
        raise NumericalError("non-finite objective or derivative at the starting point", node)
    history = [value]
    lam = 0.0
    accepted = 0
    for _ in range(max_inner):
        if math.sqrt(float(grad @ grad)) <= grad_tol:
            break
        scale = 1.0 + float(np.max(np.abs(x)))
        while True:
            try:
                chol = cho_factor(hess + lam * eye, check_finite=False)
                step = -cho_solve(chol, grad, check_finite=False)
            except np.linalg.LinAlgError:
                if lam >= MAX_DAMPING:
                    raise NumericalError("normal matrix singular after maximum damping", node)
                lam = max(10.0 * lam, damping_init)
                continue
            if float(np.max(np.abs(step))) <= 1e-12 * scale:
                return LocalSolve(x, value, accepted, history)
            trial = x + step
            trial_value, trial_hess, trial_grad = evaluate(trial)
            # a non-finite trial (overflowing step) fails this test and is rejected
            if trial_value <= value:
                x, value, hess, grad = trial, trial_value, trial_hess, trial_grad
                history.append(value)
                accepted += 1
                lam = lam / 10.0 if lam / 10.0 >= damping_init else 0.0
                break
            lam = max(10.0 * lam, damping_init)
            if lam > MAX_DAMPING:
                return LocalSolve(x, value, accepted, history)
    return LocalSolve(x, value, accepted, history)


def factor_to_variable_message(
    psi: Sequence[Factor],
    incoming: QuadraticMessage,
    linearization_point,
    target: int = 0,
    node: Optional[int] = None,
    edge_quadratic=None,
) -> QuadraticMessage:
    """Min over the non-target state of ``psi + incoming``, after linearizing ``psi``.

    ``linearization_point`` is ``(x_a, x_b)`` in the edge's key order and
    ``target`` selects which of the two the message is about; ``incoming``
    lives on the other state. The minimization is an exact Schur complement
    of the joint quadratic. ``edge_quadratic`` may pass in the
    ``linearize_factors(psi, linearization_point)`` result when already known.
    """
    x_a, x_b = (np.asarray(p, dtype=float) for p in linearization_point)
    dim = x_a.size
    if edge_quadratic is None:
        edge_quadratic = linearize_factors(psi, [x_a, x_b])
    a, b, c = edge_quadratic
    keep = slice(0, dim) if target == 0 else slice(dim, 2 * dim)
    elim = slice(dim, 2 * dim) if target == 0 else slice(0, dim)
    a_kk, a_ke, a_ee = a[keep, keep], a[keep, elim], a[elim, elim] + incoming.information_matrix
    b_k, b_e = b[keep], b[elim] + incoming.information_vector
    c = c + incoming.constant
    try:
        factor = cho_factor(a_ee, check_finite=False)
    except np.linalg.LinAlgError:
        raise NumericalError("eliminated block of edge quadratic is not positive definite", node)
    g = cho_solve(factor, a_ke.T, check_finite=False)
    h = cho_solve(factor, b_e, check_finite=False)
    return QuadraticMessage(a_kk - a_ke @ g, b_k - a_ke @ h, c - 0.5 * float(b_e @ h))


def variable_to_factor_message(
    phi: Sequence[Factor],
    incoming: Dict[object, QuadraticMessage],
    x_i,
    exclude=None,
    linearized: Optional[QuadraticMessage] = None,
) -> QuadraticMessage:
    """Linearized self-potential plus every incoming message except ``incoming[exclude]``.

    ``linearized`` may pass in ``linearized_potential(phi, x_i)`` when the
    caller already has it.
    """
    out = linearized if linearized is not None else linearized_potential(phi, x_i)
    for key, m in incoming.items():
        if key != exclude:
            out = out + m
    return out


class Belief:
    """Argmin and value of ``phi + sum(messages)`` at a node.

    ``quadratic`` (linearized self-potential plus messages at the argmin) is
    built on first use.
    """

    def __init__(self, phi: Sequence[Factor], messages: Sequence[QuadraticMessage], x, value):
        self.phi = list(phi)
        self.messages = list(messages)
        self.x = x
        self.value = value
        self._quadratic = None

    @property
    def quadratic(self) -> QuadraticMessage:
        if self._quadratic is None:
            quad = linearized_potential(self.phi, self.x)
            for m in self.messages:
                quad = quad + m
            self._quadratic = quad
        return self._quadratic


def belief_update(
    phi: Sequence[Factor],
    messages: Sequence[QuadraticMessage],
    x_i,
    max_inner: int = 20,
    damping_init: float = 1e-4,
    node: Optional[int] = None,
    linearized: Optional[QuadraticMessage] = None,
):
    """Argmin of ``phi + sum(messages)`` by local Gauss-Newton; returns ``(Belief, x_new)``.

    ``linearized`` may pass in ``linearized_potential(phi, x_i)``. Raises
    ``NumericalError`` when the aggregate quadratic at ``x_i`` is not
    positive definite.
    """
    x_i = np.asarray(x_i, dtype=float)
    aggregate = linearized if linearized is not None else linearized_potential(phi, x_i)
    for m in messages:
        aggregate = aggregate + m
    try:
        np.linalg.cholesky(aggregate.information_matrix)
    except np.linalg.LinAlgError:
        raise NumericalError("belief information matrix is not positive definite", node)
    solve = gauss_newton_local(phi, x_i, messages, max_inner, damping_init, node=node)
    return Belief(phi, messages, solve.x, solve.value), solve.x
