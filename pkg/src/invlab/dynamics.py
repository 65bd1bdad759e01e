"""Time evolution engines: Schrodinger, Bloch master equation, Ito SSE.

Deterministic engines use classical fourth-order Runge-Kutta on the
field's fixed grid (channels evaluated at step midpoints through their
closed forms or splines).  The Bloch equation integrated here is

    dr/dt = (L0 + beta L1 - lambda^2 L2) r,

    L0 = [[0, D, WI], [-D, 0, -WR], [-WI, WR, 0]],
    L1 = L0 with D = 0,
    L2 = 1/2 diag(WI^2, WR^2, WR^2 + WI^2),

with the systematic error scaling both Rabi components by (1 + beta)
and amplitude noise of strength lambda^2 entering as the diagonal
damping L2.  The pure-state engine integrates i dpsi/dt = (H0 + beta H1) psi
with H1 = H0 at zero detuning.

The stochastic engine is a plain Euler-Maruyama discretization of the
Ito stochastic Schrodinger equation

    dpsi = -i H0 dt psi - (lambda^2/2) H2^2 dt psi - i lambda H2 dW psi,

with two independent Wiener increments driving the real and imaginary
Rabi channels.  No normalization is enforced during evolution; final
probabilities divide by the squared norm to absorb the O(dt) drift.
Each trajectory draws its increments from a counter-based Philox
stream keyed by (seed, trajectory index), so ensembles are
order-independent and bit-reproducible under any batching or thread
count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import BlochState, ControlField, PureState, TimeGrid, write_csv

_MAX_SEED = 2**64


@dataclass(frozen=True)
class ErrorSetting:
    """Systematic amplitude error beta and noise intensity lambda^2 (units T)."""

    beta: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        if self.lambda2 < 0.0:
            raise ValueError(f"lambda2 must be >= 0, got {self.lambda2}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States aligned with the grid: (n, 3) float for Bloch, (n, 2) complex for pure."""

    grid: TimeGrid
    states: np.ndarray
    kind: str  # "bloch" | "pure"

    def p2(self) -> np.ndarray:
        """Excitation probability along the trajectory."""
        if self.kind == "bloch":
            return 0.5 * (1.0 - self.states[:, 2])
        n2 = np.abs(self.states[:, 0]) ** 2 + np.abs(self.states[:, 1]) ** 2
        return np.abs(self.states[:, 1]) ** 2 / n2

    def final_p2(self) -> float:
        return float(self.p2()[-1])

    def final(self):
        if self.kind == "bloch":
            return BlochState(*map(float, self.states[-1]))
        return PureState(complex(self.states[-1, 0]), complex(self.states[-1, 1]))

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.states) ** 2, axis=1))

    def to_csv(self, path) -> None:
        ts = self.grid.times
        if self.kind == "bloch":
            write_csv(path, "t,r1,r2,r3", [ts, self.states[:, 0], self.states[:, 1], self.states[:, 2]])
        else:
            write_csv(path, "t,re_c1,im_c1,re_c2,im_c2",
                      [ts, self.states[:, 0].real, self.states[:, 0].imag,
                       self.states[:, 1].real, self.states[:, 1].imag])


@dataclass(frozen=True)
class EnsembleResult:
    p2_mean: float
    p2_stderr: float
    n_traj: int
    seed: int
    dt: float

    def __post_init__(self):
        if not (0.0 <= self.p2_mean <= 1.0):
            raise ValueError(f"p2_mean out of [0, 1]: {self.p2_mean}")
        if self.p2_stderr < 0.0:
            raise ValueError(f"p2_stderr must be >= 0, got {self.p2_stderr}")


def worker_count() -> int:
    """Worker cap from INVLAB_THREADS (default 1); results never depend on it."""
    raw = os.environ.get("INVLAB_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"INVLAB_THREADS must be >= 1, got {raw}")
    return n


def run_ordered(fn, items):
    """Map fn over items, preserving order; threads capped by worker_count()."""
    workers = worker_count()
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _stage_tables(field: ControlField):
    """Channel samples at grid nodes and step midpoints for the RK4 loop."""
    ts = field.grid.times
    mids = 0.5 * (ts[:-1] + ts[1:])
    return field.values(ts), field.values(mids)


def evolve_pure(field: ControlField, psi0: PureState, beta: float = 0.0) -> Trajectory:
    """Integrate i dpsi/dt = (H0 + beta H1) psi from a normalized psi0.

    H1 scales the off-diagonal (Rabi) part only; the detuning is error-free.
    Norm is conserved to integrator accuracy (< 1e-9 on default grids).
    """
    if abs(psi0.norm() - 1.0) > 1e-6:
        raise ValueError(f"psi0 is not normalized: |psi0| = {psi0.norm()!r}")
    (wr_n, wi_n, d_n), (wr_m, wi_m, d_m) = _stage_tables(field)
    n = field.grid.n_steps
    h = field.grid.h
    om = 1.0 + beta
    out = np.empty((n, 2), dtype=complex)
    c1 = complex(psi0.c1)
    c2 = complex(psi0.c2)
    out[0] = (c1, c2)
    for i in range(n - 1):
        a1, b1 = _pure_rhs(wr_n[i], wi_n[i], d_n[i], om, c1, c2)
        a2, b2 = _pure_rhs(wr_m[i], wi_m[i], d_m[i], om, c1 + 0.5 * h * a1, c2 + 0.5 * h * b1)
        a3, b3 = _pure_rhs(wr_m[i], wi_m[i], d_m[i], om, c1 + 0.5 * h * a2, c2 + 0.5 * h * b2)
        a4, b4 = _pure_rhs(wr_n[i + 1], wi_n[i + 1], d_n[i + 1], om, c1 + h * a3, c2 + h * b3)
        c1 = c1 + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        c2 = c2 + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        out[i + 1] = (c1, c2)
    if not np.all(np.isfinite(out.view(float))):
        raise RuntimeError("pure-state integration diverged (non-finite amplitudes)")
    return Trajectory(field.grid, out, "pure")


def _pure_rhs(wr, wi, d, om, c1, c2):
    o = om * (wr - 1j * wi)
    return (-0.5j * (-d * c1 + o * c2), -0.5j * (o.conjugate() * c1 + d * c2))


def evolve_bloch(field: ControlField, r0: BlochState, setting: ErrorSetting = ErrorSetting()) -> Trajectory:
    """Integrate dr/dt = (L0 + beta L1 - lambda^2 L2) r."""
    (wr_n, wi_n, d_n), (wr_m, wi_m, d_m) = _stage_tables(field)
    n = field.grid.n_steps
    h = field.grid.h
    om = 1.0 + setting.beta
    l2 = setting.lambda2
    out = np.empty((n, 3))
    r1, r2, r3 = float(r0.r1), float(r0.r2), float(r0.r3)
    out[0] = (r1, r2, r3)
    for i in range(n - 1):
        a1, b1, c1 = _bloch_rhs(wr_n[i], wi_n[i], d_n[i], om, l2, r1, r2, r3)
        a2, b2, c2 = _bloch_rhs(wr_m[i], wi_m[i], d_m[i], om, l2,
                                r1 + 0.5 * h * a1, r2 + 0.5 * h * b1, r3 + 0.5 * h * c1)
        a3, b3, c3 = _bloch_rhs(wr_m[i], wi_m[i], d_m[i], om, l2,
                                r1 + 0.5 * h * a2, r2 + 0.5 * h * b2, r3 + 0.5 * h * c2)
        a4, b4, c4 = _bloch_rhs(wr_n[i + 1], wi_n[i + 1], d_n[i + 1], om, l2,
                                r1 + h * a3, r2 + h * b3, r3 + h * c3)
        r1 += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        r2 += (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        r3 += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[i + 1] = (r1, r2, r3)
    if not np.all(np.isfinite(out)):
        raise RuntimeError("Bloch integration diverged (non-finite components)")
    return Trajectory(field.grid, out, "bloch")


def _bloch_rhs(wr, wi, d, om, l2, r1, r2, r3):
    return (d * r2 + om * wi * r3 - 0.5 * l2 * wi * wi * r1,
            -d * r1 - om * wr * r3 - 0.5 * l2 * wr * wr * r2,
            -om * wi * r1 + om * wr * r2 - 0.5 * l2 * (wr * wr + wi * wi) * r3)


def trajectory_rng(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory, keyed by (seed, index)."""
    if not (0 <= seed < _MAX_SEED):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = np.array([seed, traj_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sse_step_count(grid: TimeGrid, dt: float) -> tuple[int, int]:
    """Sub-steps per grid interval and total step count; dt must divide the grid."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    ratio = grid.h / dt
    per = int(round(ratio))
    if per < 1 or abs(ratio - per) > 1e-9 * ratio:
        raise ValueError(f"dt={dt} does not divide the grid spacing {grid.h}")
    return per, per * (grid.n_steps - 1)


def _sse_run(field: ControlField, c1, c2, lambda2: float, dt: float,
             dw_r, dw_i, record_every: int = 0):
    """Euler-Maruyama core, vectorized over a batch of trajectories.

    ``c1, c2``: complex arrays (batch,).  ``dw_r, dw_i``: increments of
    shape (n_sse_steps, batch).  All operations are elementwise, so a
    batch of one reproduces ensemble members bit for bit.  Returns the
    final amplitudes and, if record_every > 0, the states at the grid
    nodes.
    """
    n_sse = dw_r.shape[0]
    lam = math.sqrt(lambda2)
    tk = np.arange(n_sse) * dt  # Ito: channels at left endpoints
    wr, wi, dl = field.values(tk)
    recorded = None
    if record_every:
        recorded = np.empty((n_sse // record_every + 1, c1.shape[0], 2), dtype=complex)
        recorded[0, :, 0] = c1
        recorded[0, :, 1] = c2
    for k in range(n_sse):
        w_r, w_i, d = wr[k], wi[k], dl[k]
        decay = 0.125 * lambda2 * (w_r * w_r + w_i * w_i)  # Ito drift correction, H2^2 term
        g_r = -0.5j * lam * w_r * dw_r[k]
        g_i = 0.5 * lam * w_i * dw_i[k]
        n1 = c1 + dt * (-0.5j * (-d * c1 + (w_r - 1j * w_i) * c2) - decay * c1) + g_r * c2 - g_i * c2
        n2 = c2 + dt * (-0.5j * ((w_r + 1j * w_i) * c1 + d * c2) - decay * c2) + g_r * c1 + g_i * c1
        c1, c2 = n1, n2
        if record_every and (k + 1) % record_every == 0:
            recorded[(k + 1) // record_every, :, 0] = c1
            recorded[(k + 1) // record_every, :, 1] = c2
    return c1, c2, recorded


def evolve_sse(field: ControlField, psi0: PureState, lambda2: float, dt: float,
               seed: int, traj_index: int = 0) -> Trajectory:
    """One Ito Euler-Maruyama realization; states recorded at the grid nodes.

    The trajectory is left unnormalized, as the scheme produces it.
    """
    if lambda2 < 0.0:
        raise ValueError(f"lambda2 must be >= 0, got {lambda2}")
    if abs(psi0.norm() - 1.0) > 1e-6:
        raise ValueError(f"psi0 is not normalized: |psi0| = {psi0.norm()!r}")
    per, n_sse = _sse_step_count(field.grid, dt)
    rng = trajectory_rng(seed, traj_index)
    dw = rng.normal(0.0, math.sqrt(dt), size=(n_sse, 2))
    c1 = np.array([psi0.c1], dtype=complex)
    c2 = np.array([psi0.c2], dtype=complex)
    _, _, rec = _sse_run(field, c1, c2, lambda2, dt, dw[:, :1], dw[:, 1:], record_every=per)
    return Trajectory(field.grid, rec[:, 0, :], "pure")


def monte_carlo_p2(field: ControlField, lambda2: float, n_traj: int, dt: float,
                   seed: int, batch_size: int = 1024) -> EnsembleResult:
    """Mean and standard error of P2(T) over independent SSE trajectories.

    Deterministic given the seed: trajectory i always consumes stream
    (seed, i) and the reduction runs in index order.
    """
    if n_traj < 2:
        raise ValueError(f"n_traj must be >= 2, got {n_traj}")
    if lambda2 < 0.0:
        raise ValueError(f"lambda2 must be >= 0, got {lambda2}")
    per, n_sse = _sse_step_count(field.grid, dt)
    sqdt = math.sqrt(dt)

    def one_batch(bounds):
        lo, hi = bounds
        nb = hi - lo
        dw = np.empty((nb, n_sse, 2))
        for j in range(nb):
            dw[j] = trajectory_rng(seed, lo + j).normal(0.0, sqdt, size=(n_sse, 2))
        c1 = np.ones(nb, dtype=complex)
        c2 = np.zeros(nb, dtype=complex)
        c1, c2, _ = _sse_run(field, c1, c2, lambda2, dt,
                             np.ascontiguousarray(dw[:, :, 0].T),
                             np.ascontiguousarray(dw[:, :, 1].T))
        return np.abs(c2) ** 2 / (np.abs(c1) ** 2 + np.abs(c2) ** 2)

    batches = [(lo, min(lo + batch_size, n_traj)) for lo in range(0, n_traj, batch_size)]
    p2 = np.concatenate(run_ordered(one_batch, batches))
    stderr = float(np.std(p2, ddof=1) / math.sqrt(n_traj))
    return EnsembleResult(float(np.mean(p2)), stderr, n_traj, seed, dt)
