"""Closed-loop verification: vehicles follow their routes on bearings alone.

Each vehicle is a planar unicycle driven at constant speed by a
proportional heading controller toward its current waypoint. The
controller only ever sees the state estimate of an extended information
filter fed by noisy bearing measurements to the placed landmarks, so a
run demonstrates (or refutes) that the chosen landmark placement keeps
the vehicles localized. Waypoint switching likewise uses the estimate:
the vehicle must believe itself within the switch radius. After its last
waypoint (the depot) a vehicle parks.

With all noise magnitudes zero the run is exactly deterministic and the
estimate coincides with the true state, which pins down the integration
and filter algebra in tests.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bnc import Solution, verify_solution
from .instance import Instance

_MIN_BEARING_STD = 1e-6
_RANGE_EPS = 1e-12


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass
class VehicleState:
    x: float
    y: float
    psi: float


@dataclass
class ControlInput:
    v: float
    omega: float


@dataclass
class BeliefState:
    """Gaussian belief in information form: Omega = P^-1, xi = Omega @ mean."""

    omega: np.ndarray
    xi: np.ndarray

    def mean(self) -> np.ndarray:
        try:
            return np.linalg.solve(self.omega, self.xi)
        except np.linalg.LinAlgError as exc:
            raise ValueError("information matrix is singular") from exc

    def covariance(self) -> np.ndarray:
        try:
            return np.linalg.inv(self.omega)
        except np.linalg.LinAlgError as exc:
            raise ValueError("information matrix is singular") from exc

    @classmethod
    def from_moments(cls, mean: np.ndarray, cov: np.ndarray) -> "BeliefState":
        omega = np.linalg.inv(cov)
        omega = 0.5 * (omega + omega.T)
        return cls(omega, omega @ mean)


@dataclass
class SimConfig:
    """Timing, controller, sensing and noise parameters of a run."""

    dt: float = 0.05
    steps: int = 3000
    gain: float = 2.0
    speed: float = 1.0
    omega_max: float = 4.0 * math.pi
    switch_radius: float = 2.0
    sigma_v: float = 0.05
    sigma_omega: float = 0.02
    sigma_bearing: float = 0.05
    init_cov: tuple[float, float, float] = (1.0, 1.0, 0.1)
    sensing_range: float | None = None  # default: the instance's
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0 or self.steps < 1 or self.gain <= 0 or self.speed <= 0:
            raise ValueError("dt, steps, gain and speed must be positive")
        if self.switch_radius <= 0 or self.omega_max <= 0:
            raise ValueError("switch_radius and omega_max must be positive")
        if min(self.sigma_v, self.sigma_omega, self.sigma_bearing) < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if min(self.init_cov) <= 0:
            raise ValueError("initial covariance diagonal must be positive")

    @property
    def noise_free(self) -> bool:
        return self.sigma_v == 0.0 and self.sigma_omega == 0.0 and self.sigma_bearing == 0.0


def step_dynamics(
    s: VehicleState,
    u: ControlInput,
    dt: float,
    noise: tuple[float, float] = (0.0, 0.0),
) -> VehicleState:
    """One Euler step of the unicycle; noise perturbs (v, omega)."""
    v = u.v + noise[0]
    w = u.omega + noise[1]
    return VehicleState(
        s.x + v * math.cos(s.psi) * dt,
        s.y + v * math.sin(s.psi) * dt,
        wrap_angle(s.psi + w * dt),
    )


def visible_landmarks(
    s: VehicleState, placed: list[tuple[float, float]], sensing_range: float
) -> list[tuple[int, float]]:
    """Indices and true bearings of landmarks within (closed) sensing range."""
    out = []
    for k, (lx, ly) in enumerate(placed):
        if math.hypot(lx - s.x, ly - s.y) <= sensing_range:
            out.append((k, wrap_angle(math.atan2(ly - s.y, lx - s.x) - s.psi)))
    return out


def dynamics_jacobians(
    mean: np.ndarray, u: ControlInput, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """State and input Jacobians of the Euler step at the given mean."""
    psi = mean[2]
    F = np.array(
        [
            [1.0, 0.0, -u.v * math.sin(psi) * dt],
            [0.0, 1.0, u.v * math.cos(psi) * dt],
            [0.0, 0.0, 1.0],
        ]
    )
    V = np.array(
        [
            [math.cos(psi) * dt, 0.0],
            [math.sin(psi) * dt, 0.0],
            [0.0, dt],
        ]
    )
    return F, V


def eif_predict(
    b: BeliefState,
    u: ControlInput,
    dt: float,
    sigma_v: float = 0.0,
    sigma_omega: float = 0.0,
) -> BeliefState:
    """Propagate the belief through the noise-free dynamics.

    Runs in moment form: P' = F P F^T + V diag(sv^2, sw^2) V^T with the
    mean pushed through the Euler step, then converts back.
    """
    mean = b.mean()
    P = b.covariance()
    F, V = dynamics_jacobians(mean, u, dt)
    Q = V @ np.diag([sigma_v**2, sigma_omega**2]) @ V.T
    moved = step_dynamics(VehicleState(*mean), u, dt)
    new_mean = np.array([moved.x, moved.y, moved.psi])
    new_P = F @ P @ F.T + Q
    new_P = 0.5 * (new_P + new_P.T)
    return BeliefState.from_moments(new_mean, new_P)


def bearing_jacobian(mean: np.ndarray, landmark: tuple[float, float]) -> np.ndarray:
    """Row Jacobian of the bearing measurement w.r.t. (x, y, psi)."""
    dx = landmark[0] - mean[0]
    dy = landmark[1] - mean[1]
    q = dx * dx + dy * dy
    return np.array([dy / q, -dx / q, -1.0])


def eif_update(
    b: BeliefState,
    measurements: list[tuple[tuple[float, float], float]],
    sigma_bearing: float,
) -> BeliefState:
    """Fold bearing measurements into the belief, one at a time.

    Measurements of landmarks essentially at the estimated position are
    skipped (the bearing model is undefined there). A floor keeps the
    measurement variance positive even in noise-free runs.
    """
    r_inv = 1.0 / max(sigma_bearing, _MIN_BEARING_STD) ** 2
    omega = b.omega.copy()
    xi = b.xi.copy()
    for (lx, ly), z in measurements:
        mean = np.linalg.solve(omega, xi)
        dx, dy = lx - mean[0], ly - mean[1]
        if dx * dx + dy * dy < _RANGE_EPS:
            continue
        H = bearing_jacobian(mean, (lx, ly))
        predicted = wrap_angle(math.atan2(dy, dx) - mean[2])
        innovation = wrap_angle(z - predicted)
        omega = omega + r_inv * np.outer(H, H)
        xi = xi + r_inv * H * (innovation + H @ mean)
    return BeliefState(0.5 * (omega + omega.T), xi)


def controller_step(
    est: VehicleState,
    waypoint: tuple[float, float],
    gain: float,
    omega_max: float,
    speed: float,
) -> ControlInput:
    """Proportional heading control toward the waypoint at fixed speed."""
    desired = math.atan2(waypoint[1] - est.y, waypoint[0] - est.x)
    err = wrap_angle(desired - est.psi)
    omega = max(-omega_max, min(omega_max, gain * err))
    return ControlInput(speed, omega)


@dataclass
class SimTrace:
    """Per-step, per-vehicle time series of a run.

    Arrays are indexed [step, vehicle]; ``true`` and ``est`` carry
    (x, y, psi) in the last axis and ``bound3`` the 3-sigma envelope of
    each state component.
    """

    dt: float
    true: np.ndarray
    est: np.ndarray
    bound3: np.ndarray
    n_visible: np.ndarray
    skipped_measurements: int = 0
    waypoints: list[list[tuple[float, float]]] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.true.shape[0]

    @property
    def n_vehicles(self) -> int:
        return self.true.shape[1]

    def low_visibility_steps(self) -> int:
        """Number of (step, vehicle) rows with fewer than 2 visible landmarks."""
        return int((self.n_visible < 2).sum())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["step", "vehicle", "t", "x", "y", "psi", "xhat", "yhat", "psihat",
             "sx3", "sy3", "spsi3", "n_lm"]
        )
        for step in range(self.steps):
            for veh in range(self.n_vehicles):
                writer.writerow(
                    [step, veh, repr(step * self.dt)]
                    + [repr(float(v)) for v in self.true[step, veh]]
                    + [repr(float(v)) for v in self.est[step, veh]]
                    + [repr(float(v)) for v in self.bound3[step, veh]]
                    + [int(self.n_visible[step, veh])]
                )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text())


def trace_from_csv(text: str) -> SimTrace:
    """Rebuild a trace from its CSV form (waypoints are not stored there)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    expected = ["step", "vehicle", "t", "x", "y", "psi", "xhat", "yhat",
                "psihat", "sx3", "sy3", "spsi3", "n_lm"]
    if header != expected:
        raise ValueError(f"unexpected trace header: {header}")
    rows = [r for r in reader if r]
    if not rows:
        raise ValueError("empty trace")
    steps = max(int(r[0]) for r in rows) + 1
    n_veh = max(int(r[1]) for r in rows) + 1
    dt = float(rows[n_veh][2]) if steps > 1 else 1.0
    true = np.zeros((steps, n_veh, 3))
    est = np.zeros((steps, n_veh, 3))
    bound3 = np.zeros((steps, n_veh, 3))
    n_visible = np.zeros((steps, n_veh), dtype=int)
    for r in rows:
        s, v = int(r[0]), int(r[1])
        true[s, v] = [float(r[3]), float(r[4]), float(r[5])]
        est[s, v] = [float(r[6]), float(r[7]), float(r[8])]
        bound3[s, v] = [float(r[9]), float(r[10]), float(r[11])]
        n_visible[s, v] = int(r[12])
    return SimTrace(dt, true, est, bound3, n_visible)


def route_waypoints(instance: Instance, walk: list[int]) -> list[tuple[float, float]]:
    """Waypoint coordinates of a route: its targets in order, then home."""
    if len(walk) <= 1:
        return []
    pts = []
    for v in walk[1:]:
        pt = instance.vertex(v)
        pts.append((pt.x, pt.y))
    return pts


def run_simulation(
    instance: Instance, solution: Solution, config: SimConfig | None = None
) -> SimTrace:
    """Simulate every vehicle along its route; fully seeded and reproducible.

    Raises ValueError when the solution fails the independent feasibility
    audit. Steps with fewer than two visible landmarks are recorded in the
    trace (the paper's observability condition), not treated as errors.
    """
    config = config or SimConfig()
    problems = verify_solution(instance, solution)
    if problems:
        raise ValueError("solution is not feasible for this instance: " + "; ".join(problems))
    if solution.status == "infeasible":
        raise ValueError("cannot simulate an infeasible solution")

    rho = config.sensing_range if config.sensing_range is not None else instance.sensing_range
    placed = [
        (instance.landmark_candidates[k].x, instance.landmark_candidates[k].y)
        for k in solution.landmarks
    ]
    n_veh = len(solution.routes)
    steps = config.steps
    true = np.zeros((steps, n_veh, 3))
    est = np.zeros((steps, n_veh, 3))
    bound3 = np.zeros((steps, n_veh, 3))
    n_visible = np.zeros((steps, n_veh), dtype=int)
    skipped = 0
    waypoint_lists = [route_waypoints(instance, walk) for walk in solution.routes]

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(n_veh)]
    p0 = np.diag(config.init_cov).astype(float)

    for veh in range(n_veh):
        rng = streams[veh]
        depot = instance.vertex(solution.routes[veh][0])
        waypoints = waypoint_lists[veh]
        if waypoints:
            psi0 = math.atan2(waypoints[0][1] - depot.y, waypoints[0][0] - depot.x)
        else:
            psi0 = 0.0
        state = VehicleState(depot.x, depot.y, wrap_angle(psi0))
        mean0 = np.array([state.x, state.y, state.psi])
        if not config.noise_free:
            mean0 = mean0 + rng.normal(size=3) * np.sqrt(np.diag(p0))
            mean0[2] = wrap_angle(mean0[2])
        belief = BeliefState.from_moments(mean0, p0)

        wp_idx = 0
        parked = not waypoints
        u_prev = ControlInput(0.0, 0.0)
        for step in range(steps):
            if step > 0 and not parked:
                belief = eif_predict(
                    belief, u_prev, config.dt, config.sigma_v, config.sigma_omega
                )
            vis = visible_landmarks(state, placed, rho)
            meas = []
            for k, bearing in vis:
                noisy = bearing if config.noise_free else wrap_angle(
                    bearing + rng.normal() * config.sigma_bearing
                )
                meas.append((placed[k], noisy))
            before = len(meas)
            mean = belief.mean()
            meas = [
                (pt, z)
                for pt, z in meas
                if (pt[0] - mean[0]) ** 2 + (pt[1] - mean[1]) ** 2 >= _RANGE_EPS
            ]
            skipped += before - len(meas)
            belief = eif_update(belief, meas, config.sigma_bearing)
            _check_belief(belief)
            mean = belief.mean()
            cov = belief.covariance()

            true[step, veh] = [state.x, state.y, state.psi]
            est[step, veh] = [mean[0], mean[1], wrap_angle(mean[2])]
            bound3[step, veh] = 3.0 * np.sqrt(np.maximum(np.diag(cov), 0.0))
            n_visible[step, veh] = len(vis)

            if not parked:
                wx, wy = waypoints[wp_idx]
                if math.hypot(mean[0] - wx, mean[1] - wy) <= config.switch_radius:
                    wp_idx += 1
                    if wp_idx >= len(waypoints):
                        parked = True
            if parked:
                u = ControlInput(0.0, 0.0)
            else:
                est_state = VehicleState(mean[0], mean[1], wrap_angle(mean[2]))
                u = controller_step(
                    est_state, waypoints[wp_idx], config.gain,
                    config.omega_max, config.speed,
                )
                noise = (0.0, 0.0)
                if not config.noise_free:
                    noise = (
                        rng.normal() * config.sigma_v,
                        rng.normal() * config.sigma_omega,
                    )
                state = step_dynamics(state, u, config.dt, noise)
            u_prev = u

    return SimTrace(
        config.dt, true, est, bound3, n_visible, skipped, waypoint_lists
    )


def _check_belief(b: BeliefState) -> None:
    if not np.allclose(b.omega, b.omega.T, atol=1e-9):
        raise ArithmeticError("information matrix lost symmetry")
    if np.linalg.eigvalsh(b.omega)[0] <= 0:
        raise ArithmeticError("information matrix lost positive definiteness")


# ---------------------------------------------------------------------------
# Optional SVG plots
# ---------------------------------------------------------------------------


def write_svg_plots(
    trace: SimTrace,
    instance: Instance | None,
    solution: Solution | None,
    trajectory_path: str | Path,
    error_path: str | Path,
) -> None:
    """Render trajectory and error-band plots as SVG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]

    fig, ax = plt.subplots(figsize=(7, 7))
    for veh in range(trace.n_vehicles):
        c = colors[veh % len(colors)]
        ax.plot(trace.true[:, veh, 0], trace.true[:, veh, 1], color=c,
                label=f"vehicle {veh} true")
        ax.plot(trace.est[:, veh, 0], trace.est[:, veh, 1], color=c,
                linestyle="--", alpha=0.7, label=f"vehicle {veh} estimated")
    if instance is not None and solution is not None:
        lx = [instance.landmark_candidates[k].x for k in solution.landmarks]
        ly = [instance.landmark_candidates[k].y for k in solution.landmarks]
        ax.scatter(lx, ly, marker="*", s=120, color="k", label="landmarks")
        tx = [pt.x for pt in instance.targets]
        ty = [pt.y for pt in instance.targets]
        ax.scatter(tx, ty, marker="o", s=25, color="gray", label="targets")
        dx = [pt.x for pt in instance.depots]
        dy = [pt.y for pt in instance.depots]
        ax.scatter(dx, dy, marker="s", s=60, color="tab:red", label="depots")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    fig.savefig(trajectory_path, format="svg", metadata={"Date": None})
    plt.close(fig)

    labels = ["x error", "y error", "heading error"]
    fig, axes = plt.subplots(3, trace.n_vehicles, figsize=(6 * trace.n_vehicles, 8),
                             squeeze=False)
    t = np.arange(trace.steps) * trace.dt
    for veh in range(trace.n_vehicles):
        for comp in range(3):
            ax = axes[comp][veh]
            err = trace.true[:, veh, comp] - trace.est[:, veh, comp]
            if comp == 2:
                err = np.array([wrap_angle(e) for e in err])
            band = trace.bound3[:, veh, comp]
            ax.plot(t, err, color=colors[veh % len(colors)], linewidth=0.8)
            ax.plot(t, band, color="k", linewidth=0.8, linestyle="--")
            ax.plot(t, -band, color="k", linewidth=0.8, linestyle="--")
            ax.set_ylabel(labels[comp])
            if comp == 0:
                ax.set_title(f"vehicle {veh}")
            if comp == 2:
                ax.set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(error_path, format="svg", metadata={"Date": None})
    plt.close(fig)
