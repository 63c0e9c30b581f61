"""
Post-processing of :class:`~quadtwist.sim.RunLog` records.

Step responses are judged per reference event. An event's analysis window
runs from the step until the next event on the *same* axis (or the end of the
log); the steady-state window is the last 30 % of it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .controllers import SlidingConfig
from .errors import MismatchedScenario, WindowTooShort
from .sim import AXES, RunLog, StepEvent

STEADY_FRACTION = 0.3


@dataclass(frozen=True)
class StepMetrics:
    axis: str
    step_time: float
    settling_time_2pct: float
    settling_time_5pct: float
    overshoot_pct: float
    steady_state_error: float
    rms_tracking_error: float


@dataclass(frozen=True)
class ChatterMetrics:
    axis: str
    total_variation: float
    switching_count: int
    dominant_frequency: float


@dataclass(frozen=True)
class GainTraceSummary:
    axis: str
    alpha_min: float
    alpha_max: float
    fraction_of_time_at_bounds: float


@dataclass
class LyapunovReport:
    checked: int
    violations: int
    max_violation: float
    indices: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def event_window(log: RunLog, index: int) -> tuple[float, float]:
    """Start and end time of the analysis window for schedule event ``index``."""
    events = log.schedule.events
    event = events[index]
    end = float(log.t[-1])
    for later in events[index + 1:]:
        if later.axis == event.axis and later.time > event.time:
            end = later.time
            break
    return event.time, end


def _settling(t: np.ndarray, abs_err: np.ndarray, limit: float) -> float:
    """Time from ``t[0]`` after which ``abs_err`` stays within ``limit``.

    The last exit from the band is located by linear interpolation between
    samples. Returns ``inf`` if the final sample is still outside.
    """
    outside = np.nonzero(abs_err > limit)[0]
    if len(outside) == 0:
        return 0.0
    j = outside[-1]
    if j == len(abs_err) - 1:
        return float("inf")
    e0, e1 = abs_err[j], abs_err[j + 1]
    frac = (e0 - limit) / (e0 - e1) if e0 != e1 else 1.0
    return float(t[j] + frac * (t[j + 1] - t[j]) - t[0])


def step_response_metrics(t, y, target: float, initial: float, axis: str = "", step_time: float | None = None,
                          steady_fraction: float = STEADY_FRACTION) -> StepMetrics:
    """Metrics of one step response sampled as ``(t, y)``, window = whole input.

    Raises
    ------
    WindowTooShort
        If the response has not settled into the 2 % band by the last sample.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    step = target - initial
    if step == 0:
        raise ValueError("step magnitude is zero")
    err = y - target
    abs_err = np.abs(err)
    ts2 = _settling(t, abs_err, 0.02 * abs(step))
    ts5 = _settling(t, abs_err, 0.05 * abs(step))
    if not np.isfinite(ts2):
        raise WindowTooShort(
            f"{axis or 'response'} still outside the 2% band at t={t[-1]:.4f}s (error {err[-1]:.3g})")
    overshoot = max(0.0, float(np.max(err * np.sign(step)))) / abs(step) * 100.0
    n_ss = max(1, int(round(steady_fraction * len(t))))
    tail = err[-n_ss:]
    return StepMetrics(
        axis=axis,
        step_time=float(t[0] if step_time is None else step_time),
        settling_time_2pct=ts2,
        settling_time_5pct=ts5,
        overshoot_pct=overshoot,
        steady_state_error=float(abs(np.mean(tail))),
        rms_tracking_error=float(np.sqrt(np.mean(tail ** 2))),
    )


def step_metrics(log: RunLog, event, window: float | None = None) -> StepMetrics:
    """Step-response metrics for one reference event of ``log``.

    ``event`` is an index into ``log.schedule.events`` or the
    :class:`~quadtwist.sim.StepEvent` itself. ``window`` (s) optionally
    shortens the analysis window; the log must reach it.
    """
    events = log.schedule.events
    index = events.index(event) if isinstance(event, StepEvent) else int(event)
    ev = events[index]
    start, end = event_window(log, index)
    if window is not None:
        if start + window > log.t[-1] + 1e-9 * log.dt_ctrl:
            raise WindowTooShort(f"log ends at {log.t[-1]:.4f}s, before step + window = {start + window:.4f}s")
        end = min(end, start + window)
    i0, i1 = log.index_at(start), log.index_at(end)
    if i1 - i0 < 2:
        raise WindowTooShort(f"fewer than two samples after the step at {start}s")
    sl = slice(i0, i1 + 1) if i1 < len(log) else slice(i0, len(log))
    return step_response_metrics(log.t[sl], log.Theta[sl, ev.axis], ev.target,
                                 log.schedule.previous_target(index), AXES[ev.axis], ev.time)


def all_step_metrics(log: RunLog) -> list[StepMetrics]:
    return [step_metrics(log, i) for i in range(len(log.schedule.events))]


def chatter_index(log: RunLog, window: tuple[float, float], axis: int | None = None):
    """Chattering of the control signal over ``window = (t0, t1)``.

    Total variation is taken on the applied torque ``u``; switching count and
    frequency on the discontinuous part ``u_D`` (sign changes, zeros skipped).
    Returns a list of :class:`ChatterMetrics` (one per axis) or a single one
    when ``axis`` is given.
    """
    t0, t1 = window
    if t0 < log.t[0] - 1e-12 or t1 > log.t[-1] + 1e-9 * log.dt_ctrl or t1 <= t0:
        raise WindowTooShort(f"window {window} not inside log span [{log.t[0]}, {log.t[-1]}]")
    i0, i1 = log.index_at(t0), log.index_at(t1)
    sl = slice(i0, min(i1 + 1, len(log)))
    duration = float(log.t[sl][-1] - log.t[sl][0])
    out = []
    for ax in range(3) if axis is None else (axis,):
        u = log.u[sl, ax]
        s = np.sign(log.u_D[sl, ax])
        s = s[s != 0]
        switches = int(np.count_nonzero(s[1:] != s[:-1]))
        out.append(ChatterMetrics(
            axis=AXES[ax],
            total_variation=float(np.sum(np.abs(np.diff(u)))),
            switching_count=switches,
            dominant_frequency=switches / (2.0 * duration) if duration > 0 else 0.0,
        ))
    return out if axis is None else out[0]


def steady_window(log: RunLog, index: int) -> tuple[float, float]:
    start, end = event_window(log, index)
    return end - STEADY_FRACTION * (end - start), end


def gain_trace_summary(log: RunLog, cfg: SlidingConfig, tol: float = 1e-9) -> list[GainTraceSummary]:
    """Range of the logged gains and how often they sit on ``alpha_m`` / ``alpha_M``."""
    out = []
    for ax in range(3):
        a = log.alpha[:, ax]
        at_bounds = (a <= cfg.alpha_m[ax] + tol) | (a >= cfg.alpha_M[ax] - tol)
        out.append(GainTraceSummary(AXES[ax], float(a.min()), float(a.max()), float(np.mean(at_bounds))))
    return out


def lyapunov_premises(sigma, alpha, cfg: SlidingConfig, mode: str = "all") -> np.ndarray:
    """Per-sample flag for the decrease premises ``alpha >= Xi_M/mu`` and ``|sigma|^rho > eps``.

    ``mode="all"`` requires them on every axis, ``"any"`` on at least one.
    """
    if mode not in ("all", "any"):
        raise ValueError(f"mode must be 'all' or 'any', got {mode!r}")
    sigma = np.atleast_2d(sigma)
    alpha = np.atleast_2d(alpha)
    gain_ok = alpha >= cfg.arr("Xi_M") / cfg.arr("mu")
    outside = np.abs(sigma) ** cfg.arr("rho") > cfg.arr("epsilon")
    reduce = np.all if mode == "all" else np.any
    return reduce(gain_ok & outside, axis=1)


def lyapunov_monotonicity(log: RunLog, cfg: SlidingConfig, tol: float = 1e-6, mode: str = "all") -> LyapunovReport:
    """Check that ``V`` does not grow over control steps where the decrease premises hold.

    A step ``k-1 -> k`` is checked when the premises hold at both ends; it is
    a violation when ``V[k] - V[k-1] > tol``. See :func:`lyapunov_premises`
    for ``mode``.
    """
    prem = lyapunov_premises(log.sigma, log.alpha, cfg, mode)
    checked = prem[1:] & prem[:-1]
    dV = np.diff(log.V)
    bad = np.nonzero(checked & (dV > tol))[0] + 1
    return LyapunovReport(
        checked=int(np.count_nonzero(checked)),
        violations=int(len(bad)),
        max_violation=float(dV[bad - 1].max()) if len(bad) else 0.0,
        indices=bad.tolist(),
    )


@dataclass(frozen=True)
class ComparisonRow:
    controller: str
    axis: str
    step: StepMetrics | None
    chatter: ChatterMetrics
    failure: str = ""

    @property
    def settling(self) -> float:
        return self.step.settling_time_2pct if self.step else float("inf")

    @property
    def rms(self) -> float:
        return self.step.rms_tracking_error if self.step else float("inf")


@dataclass
class ComparisonTable:
    rows: list
    rank_rms: dict
    rank_settling: dict

    def controllers(self) -> list[str]:
        return list(dict.fromkeys(r.controller for r in self.rows))

    def overall_rms(self, controller: str) -> float:
        """Steady-state RMS error pooled over the three step events."""
        vals = [r.rms for r in self.rows if r.controller == controller]
        return float(np.sqrt(np.mean(np.square(vals))))

    def mean_settling(self, controller: str) -> float:
        return float(np.mean([r.settling for r in self.rows if r.controller == controller]))

    def to_records(self) -> list[dict]:
        records = []
        for r in self.rows:
            rec = {"controller": r.controller, "axis": r.axis}
            step = asdict(r.step) if r.step else {k: float("nan") for k in StepMetrics.__dataclass_fields__}
            step.pop("axis")
            rec.update(step)
            chatter = asdict(r.chatter)
            chatter.pop("axis")
            rec.update(chatter)
            rec["rank_rms"] = self.rank_rms[r.controller]
            rec["rank_settling"] = self.rank_settling[r.controller]
            rec["failure"] = r.failure
            records.append(rec)
        return records

    def to_csv(self) -> str:
        records = self.to_records()
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(records[0]), lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in rec.items()})
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'controller':<18} {'axis':<6} {'ts2%[s]':>9} {'ts5%[s]':>9} {'OS[%]':>8} " \
               f"{'rms[deg]':>10} {'TV[Nm]':>10} {'switch':>7} {'rk_rms':>6} {'rk_ts':>6}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            s = r.step
            fmt = (lambda v, w, p: f"{v:>{w}.{p}f}")
            lines.append(
                f"{r.controller:<18} {r.axis:<6} "
                + (f"{fmt(s.settling_time_2pct, 9, 4)} {fmt(s.settling_time_5pct, 9, 4)} {fmt(s.overshoot_pct, 8, 3)} "
                   f"{fmt(np.degrees(s.rms_tracking_error), 10, 5)} " if s else f"{'-':>9} {'-':>9} {'-':>8} {'-':>10} ")
                + f"{fmt(r.chatter.total_variation, 10, 3)} {r.chatter.switching_count:>7d} "
                f"{self.rank_rms[r.controller]:>6d} {self.rank_settling[r.controller]:>6d}"
            )
        return "\n".join(lines)


def _dense_rank(values: dict) -> dict:
    order = sorted(set(values.values()))
    return {k: order.index(v) + 1 for k, v in values.items()}


def compare_controllers(logs: dict) -> ComparisonTable:
    """Side-by-side metrics for runs of several controllers on one scenario.

    ``logs`` maps controller name to its :class:`RunLog`. Controllers are
    ranked (1 = best, ties share a rank) by pooled steady-state RMS error and
    by mean 2 % settling time.
    """
    items = list(logs.items())
    ref = items[0][1]
    for name, log in items[1:]:
        same = (log.scenario == ref.scenario and log.schedule == ref.schedule and log.dt_ctrl == ref.dt_ctrl
                and len(log) == len(ref) and log.meta.get("scenario_hash") == ref.meta.get("scenario_hash"))
        if not same:
            raise MismatchedScenario(f"log for {name!r} does not come from the same scenario as {items[0][0]!r}")
    rows = []
    for name, log in items:
        for i, ev in enumerate(log.schedule.events):
            chatter = chatter_index(log, steady_window(log, i), axis=ev.axis)
            try:
                rows.append(ComparisonRow(name, AXES[ev.axis], step_metrics(log, i), chatter))
            except WindowTooShort as exc:
                rows.append(ComparisonRow(name, AXES[ev.axis], None, chatter, failure=str(exc)))
    table = ComparisonTable(rows, {}, {})
    table.rank_rms = _dense_rank({n: table.overall_rms(n) for n, _ in items})
    table.rank_settling = _dense_rank({n: table.mean_settling(n) for n, _ in items})
    return table
