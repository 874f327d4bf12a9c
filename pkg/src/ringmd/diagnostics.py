"""Energy accounting, drift metrics, and structure-preservation harnesses.

The stability metrics follow the usual drift conventions: the drift D is the
least-squares slope of the total energy against time divided by the average
kinetic energy, Noise is the variance of the regression residuals, and the
absolute/relative energy variations are

    dE   = (1/J) sum_i |E(i) - E(0)|        (i = 1..J, recorded rows)
    dE_r = dE / K

with K the trace-mean kinetic energy.
"""
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DiagnosticsError
from .forcefield import total_full_force
from .normal_modes import spring_energy
from .state import dof_masses

TRACE_COLUMNS = ("step", "time", "kinetic", "spring", "potential", "total", "max_g", "max_f")


@dataclass
class EnergyTrace:
    """Recorded time series of energy components and constraint residuals."""

    steps: np.ndarray
    times: np.ndarray
    kinetic: np.ndarray
    spring: np.ndarray
    potential: np.ndarray
    total: np.ndarray
    max_g: np.ndarray
    max_f: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=int)
        for name in TRACE_COLUMNS[1:]:
            setattr(self, _col_attr(name), np.asarray(getattr(self, _col_attr(name)), dtype=float))
        if len(self.steps) > 1 and np.any(np.diff(self.steps) <= 0):
            raise DiagnosticsError("trace step indices must be strictly increasing")

    def __len__(self):
        return len(self.steps)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())

    def to_csv_text(self):
        """Metadata as leading '#' comment lines, then the exact header row."""
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={self.metadata[key]}\n")
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        cols = [getattr(self, _col_attr(c)) for c in TRACE_COLUMNS]
        for row in zip(*cols):
            fields = [str(int(row[0]))] + [format(v, ".17g") for v in row[1:]]
            buf.write(",".join(fields) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path):
        metadata = {}
        rows = []
        with open(path, encoding="utf-8") as fh:
            header = None
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, _, value = body.partition("=")
                        metadata[key.strip()] = _parse_meta(value.strip())
                    continue
                if header is None:
                    header = tuple(line.split(","))
                    if header != TRACE_COLUMNS:
                        raise DiagnosticsError(f"unexpected trace header {header}")
                    continue
                rows.append([float(tok) for tok in line.split(",")])
        if header is None:
            raise DiagnosticsError(f"no header row in {path}")
        data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(TRACE_COLUMNS)))
        return cls(steps=data[:, 0].astype(int), times=data[:, 1], kinetic=data[:, 2],
                   spring=data[:, 3], potential=data[:, 4], total=data[:, 5],
                   max_g=data[:, 6], max_f=data[:, 7], metadata=metadata)


def _col_attr(name):
    return {"step": "steps", "time": "times"}.get(name, name)


def _parse_meta(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("True", "False"):
        return text == "True"
    return text


@dataclass
class StabilityMetrics:
    """Drift, regression noise, and energy-variation summary of one trace."""

    drift: float
    noise: float
    delta_e: float
    delta_e_r: float


def kinetic_energy(state, masses):
    return float(0.5 * np.sum(state.momenta ** 2 / np.asarray(masses)[:, None]))


def hamiltonian(state, topology, units, ff_spec):
    """(kinetic, spring, potential, total) of the ring-polymer Hamiltonian."""
    masses = dof_masses(topology)
    alpha = units.alpha(state.n_beads)
    kin = kinetic_energy(state, masses)
    spr = spring_energy(state.positions, masses, alpha)
    pot, _ = total_full_force(state.positions, topology, ff_spec)
    return kin, spr, pot, kin + spr + pot


def compute_metrics(trace):
    """Stability metrics from a recorded trace (needs at least two rows)."""
    if len(trace) < 2:
        raise DiagnosticsError("metric regression undefined on fewer than 2 rows")
    t = trace.times
    e = trace.total
    t_mean = t.mean()
    e_mean = e.mean()
    denom = float(np.sum((t - t_mean) ** 2))
    if denom == 0.0:
        raise DiagnosticsError("metric regression undefined: all times equal")
    slope = float(np.sum((t - t_mean) * (e - e_mean)) / denom)
    residuals = e - (e_mean + slope * (t - t_mean))
    noise = float(np.var(residuals))
    kin_mean = float(trace.kinetic.mean())
    delta_e = float(np.mean(np.abs(e[1:] - e[0])))
    return StabilityMetrics(drift=slope / kin_mean, noise=noise,
                            delta_e=delta_e, delta_e_r=delta_e / kin_mean)


def flip_momenta(state):
    out = state.copy()
    out.momenta = -out.momenta
    return out


def reversibility_defect(state, step_fn, n_steps):
    """Max-norm distance after n steps, momentum flip, n steps, flip back.

    step_fn maps a state to a StepOutcome (or directly to a state).
    """
    def advance(s):
        out = step_fn(s)
        new = getattr(out, "state", out)
        if getattr(out, "failed", False):
            raise DiagnosticsError(f"stepper failed during reversibility run: "
                                   f"{out.failure_reason}")
        return new

    s = state.copy()
    for _ in range(n_steps):
        s = advance(s)
    s = flip_momenta(s)
    for _ in range(n_steps):
        s = advance(s)
    s = flip_momenta(s)
    dx = np.abs(s.positions - state.positions).max() if state.positions.size else 0.0
    dp = np.abs(s.momenta - state.momenta).max() if state.momenta.size else 0.0
    return float(max(dx, dp))


def symplecticity_defect(state, step_fn, fd_step=1e-5):
    """Max-norm of J^T Sigma J - Sigma for the one-step Jacobian.

    The Jacobian is built by central differences on the flattened (x, p)
    phase vector, so this is only meaningful for small unconstrained
    systems where step_fn is smooth in the state.
    """
    from .state import RingPolymerState

    shape = state.positions.shape
    n = state.positions.size

    def pack(s):
        return np.concatenate([s.positions.ravel(), s.momenta.ravel()])

    def unpack(z):
        return RingPolymerState(z[:n].reshape(shape).copy(),
                                z[n:].reshape(shape).copy(), state.time)

    def phi(z):
        out = step_fn(unpack(z))
        new = getattr(out, "state", out)
        if getattr(out, "failed", False):
            raise DiagnosticsError("stepper failed during Jacobian probe")
        return pack(new)

    z0 = pack(state)
    dim = 2 * n
    jac = np.empty((dim, dim))
    for k in range(dim):
        dz = np.zeros(dim)
        dz[k] = fd_step
        jac[:, k] = (phi(z0 + dz) - phi(z0 - dz)) / (2.0 * fd_step)
    sigma = np.zeros((dim, dim))
    sigma[:n, n:] = np.eye(n)
    sigma[n:, :n] = -np.eye(n)
    return float(np.abs(jac.T @ sigma @ jac - sigma).max())
