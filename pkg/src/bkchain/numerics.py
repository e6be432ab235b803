"""Dense numerical kernels used by the rest of the package.

Everything here is deterministic, desk-scale (matrices up to ~64x64), and
value-semantic: no caches, no global state, safe to call from many threads.
Dense factorizations are delegated to LAPACK through numpy; the Lyapunov
solve, the fixed-step integrator, and the discrete winding number are
implemented directly because their contracts (Kronecker form, classical
RK4 with divergence detection, argument-principle winding) are part of the
package API.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import (
    CurveTouchesReferenceError,
    EigenConvergenceError,
    InsufficientSamplingError,
    NonHurwitzError,
    NonIntegerWindingError,
    SingularMatrixError,
)

#: Largest matrix order accepted by the dense eigensolver.
MAX_DENSE_ORDER = 64

#: Condition-number ceiling beyond which linear solves are refused.
DEFAULT_CONDITION_LIMIT = 1e12

#: Eigenvector-matrix condition number that flags a defective (EP) matrix.
DEFECTIVE_CONDITION = 1e8


def solve_linear(
    a: NDArray,
    b: NDArray,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> NDArray:
    """Solve a @ x = b for square, well-conditioned a.

    Raises
    ------
    SingularMatrixError
        If a is singular or its 2-norm condition estimate exceeds
        ``condition_limit``; the estimate is attached to the exception.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag if np.iscomplexobj(a) else a.real))):
        raise ValueError("matrix entries must be finite")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > condition_limit:
        raise SingularMatrixError(
            f"matrix is singular or ill-conditioned (condition estimate {cond:.3e}, "
            f"limit {condition_limit:.3e})",
            condition=cond,
        )
    return np.linalg.solve(a, b)


@dataclass(frozen=True)
class EigenResult:
    """Eigendecomposition sorted by descending real part.

    ``defective`` is set when the eigenvector matrix has condition number
    above ``DEFECTIVE_CONDITION``; eigenvalues are then still usable (to
    roughly 1e-6 absolute for desk-scale matrices) but the eigenvectors do
    not span the space, which is the signature of an exceptional point.
    """

    values: NDArray
    vectors: NDArray
    defective: bool
    vector_condition: float


def eigendecompose(a: NDArray) -> EigenResult:
    """Eigenvalues and right eigenvectors of a square matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DENSE_ORDER:
        raise ValueError(f"matrix order {a.shape[0]} exceeds desk-scale limit {MAX_DENSE_ORDER}")
    try:
        values, vectors = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure path
        raise EigenConvergenceError(str(exc)) from exc
    order = np.argsort(-values.real, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    with np.errstate(divide="ignore", over="ignore"):
        cond = float(np.linalg.cond(vectors))
    defective = (not np.isfinite(cond)) or cond > DEFECTIVE_CONDITION
    return EigenResult(values=values, vectors=vectors, defective=defective, vector_condition=cond)


@dataclass(frozen=True)
class SvdResult:
    singular_values: NDArray
    u: NDArray
    vh: NDArray


def svd(a: NDArray) -> SvdResult:
    """Singular value decomposition with singular values in descending order.

    Returned in reduced form, so a == (u * singular_values) @ vh."""
    a = np.asarray(a)
    if not np.all(np.isfinite(np.abs(a))):
        raise ValueError("matrix entries must be finite")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return SvdResult(singular_values=s, u=u, vh=vh)


def solve_lyapunov(m: NDArray, d: NDArray, residual_tol: float = 1e-10) -> NDArray:
    """Solve m @ sigma + sigma @ m.T + d = 0 for the stationary covariance.

    Uses the vectorized Kronecker form (I (x) m + m (x) I) vec(sigma) = -vec(d),
    which is exact and direct at desk scale. The result is symmetrized.

    Raises
    ------
    NonHurwitzError
        If m has an eigenvalue with non-negative real part; the offending
        eigenvalue is attached (this is the dynamical-instability signal).
    """
    m = np.asarray(m, dtype=float)
    d = np.asarray(d, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n) or d.shape != (n, n):
        raise ValueError("m and d must be square matrices of equal order")
    eig = eigendecompose(m)
    worst = eig.values[0]
    # marginal spectra (real part within roundoff of zero) have no finite
    # stationary covariance either; reject them with the offending eigenvalue
    dead_band = 1e-12 * max(float(np.abs(eig.values).max()), 1e-300)
    if worst.real >= -dead_band:
        raise NonHurwitzError(
            f"generator is not Hurwitz: eigenvalue {worst} has real part {worst.real:.3e}",
            eigenvalue=complex(worst),
        )
    eye = np.eye(n)
    kron = np.kron(eye, m) + np.kron(m, eye)
    sigma = solve_linear(kron, -d.reshape(-1, order="F")).reshape((n, n), order="F")
    sigma = 0.5 * (sigma + sigma.T)
    residual = np.abs(m @ sigma + sigma @ m.T + d).max()
    scale = max(np.abs(d).max(), 1e-300)
    if residual > residual_tol * scale:
        raise SingularMatrixError(
            f"Lyapunov residual {residual:.3e} exceeds {residual_tol:.1e} * ||d||"
        )
    return sigma


@dataclass
class Trajectory:
    """Fixed-step integration record.

    ``states[i]`` is the state at ``times[i]``; the time grid is strictly
    increasing. ``status`` is "completed" or "diverged"; a diverged
    trajectory ends at the last finite, in-bound sample.
    """

    times: NDArray
    states: NDArray
    status: str = "completed"
    metadata: dict = field(default_factory=dict)

    @property
    def final_state(self) -> NDArray:
        return self.states[-1]


def integrate_ivp(
    f: Callable[[float, NDArray], NDArray],
    y0: NDArray,
    t_span: tuple[float, float],
    step: float,
    blow_up: float = 1e12,
    record_every: int = 1,
) -> Trajectory:
    """Integrate dy/dt = f(t, y) with the classical 4th-order Runge-Kutta scheme.

    The step is fixed (the final step is shortened to land on t_end exactly);
    global error is O(step^4). If the state norm exceeds ``blow_up`` the
    integration stops and the trajectory is marked "diverged" -- used to
    detect dynamical instability rather than treated as a failure.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t_end > t_start")
    if not step > 0:
        raise ValueError("step must be positive")
    y = np.array(y0, copy=True)
    if not np.all(np.isfinite(np.abs(y))):
        raise ValueError("initial state must be finite")
    n_steps = int(np.ceil((t1 - t0) / step - 1e-12))
    times = [t0]
    states = [y.copy()]
    status = "completed"
    t = t0
    for i in range(n_steps):
        h = min(step, t1 - t)
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * step if t + h < t1 else t1
        norm = float(np.linalg.norm(y))
        if not np.isfinite(norm) or norm > blow_up:
            status = "diverged"
            break
        if (i + 1) % record_every == 0 or t >= t1:
            times.append(t)
            states.append(y.copy())
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        status=status,
        metadata={"integrator": "rk4", "step": step, "record_every": record_every},
    )


def winding_from_samples(
    samples: NDArray,
    z0: complex = 0.0,
    min_distance: float = 1e-9,
    integer_tol: float = 1e-6,
) -> int:
    """Winding number of a closed sampled curve about the reference point z0.

    The samples must be ordered along the curve over one full period; the
    closing segment from the last sample back to the first is included.
    The winding is the sum of principal-branch phase increments of
    (sample - z0) divided by 2*pi, snapped to the nearest integer.

    Raises
    ------
    CurveTouchesReferenceError
        If any sample lies within ``min_distance`` of z0.
    InsufficientSamplingError
        If any single phase increment exceeds pi/2 (the discrete sum is
        then not trustworthy).
    NonIntegerWindingError
        If the accumulated phase is further than ``integer_tol`` from an
        integer multiple of 2*pi.
    """
    z = np.asarray(samples, dtype=complex).ravel() - z0
    if z.size < 4:
        raise ValueError("need at least 4 samples")
    dist = np.abs(z)
    if dist.min() < min_distance:
        raise CurveTouchesReferenceError(
            f"curve touches reference point (min distance {dist.min():.3e} < {min_distance:.1e})"
        )
    increments = np.angle(np.roll(z, -1) / z)
    worst = np.abs(increments).max()
    if worst > np.pi / 2:
        raise InsufficientSamplingError(
            f"insufficient sampling: a phase increment of {worst:.3f} rad exceeds pi/2"
        )
    total = increments.sum() / (2.0 * np.pi)
    nearest = round(total)
    if abs(total - nearest) > integer_tol:
        raise NonIntegerWindingError(
            f"winding {total!r} is not within {integer_tol:.1e} of an integer"
        )
    return int(nearest)


def matrix_exponential_oracle(m: NDArray, t: float) -> NDArray:
    """exp(m*t) via scipy's scaling-and-squaring; reference path for tests."""
    from scipy.linalg import expm

    return expm(np.asarray(m) * t)
