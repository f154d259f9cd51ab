"""Fault-tolerant resource estimates with and without outsourced QRAM queries.

The user runs a surface-code computation on ``tiles`` logical tiles and has to
supply ``t_count_total`` T-states. A fraction ``f_outsourced`` of them is
consumed inside queries executed by a remote data center; only the rest is
distilled locally. Waiting on the data center inflates the user's code cycle
count by ``1 + delay_factor(N)``.

All times are counted in code cycles; ``cycle_time`` only converts for reports.
"""

from __future__ import annotations

import bisect
import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from qdc.errors import ConfigurationError, DomainWarning, InfeasibleError

DELAY_MODELS = ("sqrt", "log", "none")
THRESHOLDS = (0.1, 1.0, 10.0)
INPUTS_PER_OUTPUT = 15
SWEEP_HEADER = ("N", "ratio_sqrt", "ratio_log", "d_with", "d_without", "flags")

# kappa for which ratio_log(N=2**10) sits on each threshold with default params
KAPPA_PRESETS = {0.1: 0.9547, 1.0: 9.683, 10.0: 91.12}


@dataclass(frozen=True)
class FtCostParams:
    logical_qubits: int = 100
    t_count_total: int = 10**8
    p: float = 1e-3
    budget: float = 0.01
    f_outsourced: float = 0.99
    tiles: int = 164
    kappa: float = 1.0
    delay_model: str = "sqrt"
    cycles_per_distill: int = 11
    factories: int = 1
    distillation_share: float = 0.5
    extra_tiles_per_level: int = 11
    ship_cycles_per_state: int = 1
    distance_cap: int = 51
    odd_only: bool = False
    max_level: int = 4
    cycle_time: float = 1e-6

    def __post_init__(self):
        if not 0 <= self.f_outsourced <= 1:
            raise ConfigurationError("f_outsourced must lie in [0, 1]")
        if not 0 < self.p < 1:
            raise ConfigurationError("p must lie in (0, 1)")
        if not 0 < self.budget < 1:
            raise ConfigurationError("budget must lie in (0, 1)")
        if not 0 < self.distillation_share < 1:
            raise ConfigurationError("distillation_share must lie in (0, 1)")
        if self.tiles < 1 or self.factories < 1 or self.cycles_per_distill < 1:
            raise ConfigurationError("tiles, factories and cycles_per_distill must be >= 1")
        if self.t_count_total < 0 or self.logical_qubits < 1:
            raise ConfigurationError("t_count_total must be >= 0 and logical_qubits >= 1")
        if self.kappa < 0:
            raise ConfigurationError("kappa must be >= 0")
        if self.delay_model not in DELAY_MODELS:
            raise ConfigurationError(f"delay_model must be one of {DELAY_MODELS}")
        if self.distance_cap < 3:
            raise ConfigurationError("distance_cap must be >= 3")
        if self.max_level < 1:
            raise ConfigurationError("max_level must be >= 1")

    @classmethod
    def from_mapping(cls, values: Mapping) -> "FtCostParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"unknown estimator parameters: {', '.join(unknown)}")
        return cls(**values)

    @property
    def distances(self) -> tuple[int, ...]:
        step = 2 if self.odd_only else 1
        return tuple(range(3, self.distance_cap + 1, step))

    @property
    def distillation_budget(self) -> float:
        return self.budget * self.distillation_share

    @property
    def logical_budget(self) -> float:
        return self.budget - self.distillation_budget

    @property
    def outsourced_states(self) -> int:
        return round(self.f_outsourced * self.t_count_total)

    @property
    def user_states(self) -> int:
        return self.t_count_total - self.outsourced_states


def logical_error_rate(p: float, d: int) -> float:
    """Per-tile, per-code-cycle logical failure ``0.1 (100 p)^((d+1)/2) / d``."""
    if d < 3:
        raise ConfigurationError(f"code distance {d} < 3")
    if p >= 0.01:
        warnings.warn(f"p={p} is at or above the surface-code threshold scale", DomainWarning, stacklevel=2)
    return 0.1 * (100 * p) ** ((d + 1) / 2) / d


def per_state_failure(p: float, level: int) -> float:
    """Output failure of ``level`` rounds of 15-to-1 distillation."""
    if level < 1:
        raise ConfigurationError("distillation level must be >= 1")
    f = p
    for _ in range(level):
        f = 35 * f**3
    return f


@dataclass(frozen=True)
class DistillationScheme:
    level: int
    p: float

    @property
    def per_state_failure(self) -> float:
        return per_state_failure(self.p, self.level)

    @property
    def inputs_per_output(self) -> int:
        return INPUTS_PER_OUTPUT**self.level

    def tiles_overhead(self, extra_tiles_per_level: int) -> int:
        return extra_tiles_per_level * (self.level - 1)


def select_distillation(states_needed: int, p: float, error_share: float, max_level: int = 4) -> DistillationScheme:
    """Lowest level whose total failure mass over ``states_needed`` stays below the share."""
    if states_needed < 1:
        raise ConfigurationError("states_needed must be >= 1")
    for level in range(1, max_level + 1):
        if states_needed * per_state_failure(p, level) < error_share:
            return DistillationScheme(level, p)
    raise InfeasibleError(
        f"no distillation level <= {max_level} brings {states_needed} states below {error_share}"
    )


def required_distance(
    params: FtCostParams,
    cycles_with_delay: int,
    *,
    tiles: int | None = None,
    share: float | None = None,
) -> int:
    """Smallest distance in ``params.distances`` meeting the logical-error share."""
    if cycles_with_delay < 1:
        raise ConfigurationError("cycles_with_delay must be >= 1")
    tiles = params.tiles if tiles is None else tiles
    share = params.logical_budget if share is None else share
    ds = params.distances

    def ok(d):
        return tiles * cycles_with_delay * logical_error_rate(params.p, d) < share

    # the rate falls monotonically in d, so feasibility is a suffix of ``ds``
    k = bisect.bisect_left(range(len(ds)), True, key=lambda i: ok(ds[i]))
    if k == len(ds):
        raise InfeasibleError(f"no code distance <= {params.distance_cap} meets the logical error share")
    return ds[k]


def code_cycles_for_distillation(
    states_needed: int, scheme: DistillationScheme | None, d: int, params: FtCostParams
) -> int:
    """Code cycles to distill ``states_needed`` outputs at distance ``d``."""
    if states_needed == 0:
        return 0
    if scheme is None:
        raise ConfigurationError("a distillation scheme is needed for a nonzero state count")
    per_state = params.cycles_per_distill * INPUTS_PER_OUTPUT ** (scheme.level - 1) * d
    return -(-states_needed * per_state // params.factories)


def delay_factor(n: int, model: str, kappa: float) -> float:
    if n < 2:
        raise ConfigurationError("N must be >= 2")
    if model == "sqrt":
        return kappa * math.sqrt(n)
    if model == "log":
        return kappa * math.log2(n)
    if model == "none":
        return 0.0
    raise ConfigurationError(f"unknown delay model {model!r}")


@dataclass(frozen=True)
class ScenarioCost:
    states_distilled: int
    states_shipped: int
    level: int
    distance: int
    tiles: int
    base_cycles: int
    delay: float
    code_cycles: int
    distillation_failure: float
    logical_failure: float
    iterations: int

    @property
    def total_error(self) -> float:
        return self.distillation_failure + self.logical_failure


@dataclass(frozen=True)
class CostReport:
    n: int
    delay_model: str
    with_qdc: ScenarioCost
    without_qdc: ScenarioCost
    cycle_time: float = 1e-6

    @property
    def relative_time_cost(self) -> float:
        return self.with_qdc.code_cycles / self.without_qdc.code_cycles

    @property
    def chosen_level(self) -> int:
        return self.with_qdc.level

    @property
    def chosen_distance(self) -> int:
        return self.with_qdc.distance

    @property
    def code_cycles(self) -> int:
        return self.with_qdc.code_cycles

    @property
    def delay(self) -> float:
        return self.with_qdc.delay

    @property
    def total_error(self) -> float:
        return self.with_qdc.total_error

    @property
    def wall_time_with(self) -> float:
        return self.with_qdc.code_cycles * self.cycle_time

    @property
    def wall_time_without(self) -> float:
        return self.without_qdc.code_cycles * self.cycle_time

    def to_dict(self) -> dict:
        out = {
            "N": self.n,
            "delay_model": self.delay_model,
            "cycle_time": self.cycle_time,
            "relative_time_cost": self.relative_time_cost,
            "wall_time_with": self.wall_time_with,
            "wall_time_without": self.wall_time_without,
        }
        for name in ("with_qdc", "without_qdc"):
            s = getattr(self, name)
            out[name] = dataclasses.asdict(s) | {"total_error": s.total_error}
        return out


def scenario_cost(params: FtCostParams, distilled: int, shipped: int, delay: float) -> ScenarioCost:
    """Distance and cycle count at the least fixed point of distance selection."""
    scheme = None
    distill_fail = 0.0
    if distilled:
        scheme = select_distillation(distilled, params.p, params.distillation_budget, params.max_level)
        distill_fail = distilled * scheme.per_state_failure
    tiles = params.tiles + (scheme.tiles_overhead(params.extra_tiles_per_level) if scheme else 0)
    d = params.distances[0]
    for it in range(1, 11):
        base = code_cycles_for_distillation(distilled, scheme, d, params) + shipped * params.ship_cycles_per_state
        cycles = max(1, math.ceil(base * (1 + delay)))
        new_d = required_distance(params, cycles, tiles=tiles)
        if new_d == d:
            return ScenarioCost(
                states_distilled=distilled,
                states_shipped=shipped,
                level=scheme.level if scheme else 0,
                distance=d,
                tiles=tiles,
                base_cycles=base,
                delay=delay,
                code_cycles=cycles,
                distillation_failure=distill_fail,
                logical_failure=tiles * cycles * logical_error_rate(params.p, d),
                iterations=it,
            )
        d = new_d
    raise InfeasibleError("distance selection did not settle within 10 iterations")


def evaluate(params: FtCostParams, n: int, model: str | None = None) -> CostReport:
    model = params.delay_model if model is None else model
    shipped = params.outsourced_states
    delay = delay_factor(n, model, params.kappa) if shipped else 0.0
    with_qdc = scenario_cost(params, params.user_states, shipped, delay)
    without_qdc = scenario_cost(params, params.t_count_total, 0, 0.0)
    return CostReport(n, model, with_qdc, without_qdc, params.cycle_time)


def relative_time_cost(params: FtCostParams, n: int) -> float:
    return evaluate(params, n).relative_time_cost


@dataclass(frozen=True)
class SweepRow:
    n: int | None
    ratio_sqrt: float | None
    ratio_log: float | None
    d_with: int | None
    d_without: int | None
    flags: str = ""
    reports: dict = field(default_factory=dict, compare=False, repr=False)

    def csv_fields(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            return repr(float(v)) if isinstance(v, float) else str(v)

        return [fmt(v) for v in (self.n, self.ratio_sqrt, self.ratio_log, self.d_with, self.d_without)] + [self.flags]


def sweep(params: FtCostParams, n_range: Iterable[int]) -> list[SweepRow]:
    """One row per N; the ``d_with`` column belongs to the sqrt-delay scenario."""
    models = ("none", "none") if params.delay_model == "none" else ("sqrt", "log")
    rows = []
    for n in n_range:
        n = int(n)
        if n < 2 or n & (n - 1):
            raise ConfigurationError(f"N={n} is not a power of two")
        try:
            sq, lg = (evaluate(params, n, m) for m in models)
        except InfeasibleError:
            rows.append(SweepRow(n, None, None, None, None, "infeasible"))
            continue
        rows.append(
            SweepRow(
                n,
                sq.relative_time_cost,
                lg.relative_time_cost,
                sq.with_qdc.distance,
                sq.without_qdc.distance,
                "",
                {"sqrt": sq.to_dict(), "log": lg.to_dict()},
            )
        )
    return rows


def threshold_rows(thresholds: Iterable[float] = THRESHOLDS) -> list[SweepRow]:
    return [SweepRow(None, float(t), float(t), None, None, "threshold") for t in thresholds]


def sweep_to_csv(rows: Iterable[SweepRow]) -> str:
    lines = [",".join(SWEEP_HEADER)]
    lines += [",".join(r.csv_fields()) for r in rows]
    return "\n".join(lines) + "\n"


def sweep_to_json(rows: Iterable[SweepRow]) -> str:
    payload = [
        {
            "N": r.n,
            "ratio_sqrt": r.ratio_sqrt,
            "ratio_log": r.ratio_log,
            "d_with": r.d_with,
            "d_without": r.d_without,
            "flags": r.flags,
            "reports": r.reports,
        }
        for r in rows
    ]
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def calibrate_kappa(params: FtCostParams, threshold: float, n: int = 2**10, model: str = "log") -> float:
    """Bisect kappa so the ``model`` ratio at ``n`` reaches ``threshold``."""
    lo, hi = 0.0, 1.0
    while evaluate(dataclasses.replace(params, kappa=hi), n, model).relative_time_cost < threshold:
        hi *= 2
        if hi > 1e12:
            raise InfeasibleError("threshold unreachable")
    for _ in range(60):
        mid = (lo + hi) / 2
        if evaluate(dataclasses.replace(params, kappa=mid), n, model).relative_time_cost < threshold:
            lo = mid
        else:
            hi = mid
    return hi
