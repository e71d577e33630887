"""Canned numerical experiments with machine-readable pass/fail reports.

Each runner reproduces one benchmark experiment: the two equilibrium sweeps,
the two long-run stability illustrations, and the treatment-impact
comparisons. Expected values are curated reference numbers shipped with the
package; each assertion records name, expected, actual, tolerance, and
status, and the whole result can be dumped to CSV.

The sweep and stability targets were generated under a pinned incidence
denominator (the tables pin it at the disease-free population, the
stability and treatment runs at the initial census of 50000); every runner
records the convention it used in its ScenarioSpec.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dynamics import Trajectory, integrate
from .equilibria import (EquilibriumReport, hiv_free, syndemic,
                         tb_free_closed, tb_free_numeric)
from .model import (COMPARTMENTS, INFECTED_INDICES, Parameters,
                    full_rhs, total_population)
from .reproduction import ReproductionNumbers, r0, r2_closed
from .stability import eigenvalues, jacobian

INITIAL_FRACTIONS = np.array([0.60, 0.14, 0.03, 0.0, 0.04, 0.01,
                              0.12, 0.05, 0.0, 0.01])
INITIAL_POPULATION = 50000.0

# Curated benchmark values. TB sweep: beta1 -> (R1, endemic active-TB count)
# at the disease-free population scale. The 4.3 row sits just below
# threshold, so its comparison uses an absolute band of 0.01 persons.
TB_SWEEP_REFERENCE = {
    4.3: (0.99788, 0.00397),
    6.0: (1.39239, 903.93492),
    10.0: (2.32065, 2206.57268),
    15.0: (3.48097, 2870.72755),
    50.0: (11.60326, 3804.50589),
}

# HIV sweep: beta2 -> (R2, equilibrium HIV count, equilibrium AIDS count).
# Three of the infected-count cells (0.051, 0.055, 0.099) are mutually
# inconsistent with the R2 values published alongside them (the closed form
# ties the two together); the runner asserts them anyway and reports the
# failures rather than hiding them.
HIV_SWEEP_REFERENCE = {
    0.051: (0.93669, 0.01708, 0.00266),
    0.055: (1.01016, 135.73817, 21.07182),
    0.07: (1.28566, 2516.54721, 390.59491),
    0.09: (1.65299, 4472.84980, 694.23361),
    0.099: (1.81829, 4930.48696, 765.26396),
}

# Fully endemic reference state (order as COMPARTMENTS) for beta1=6,
# beta2=0.1 under the 50000-pinned denominator, and the reproduction pair
# quoted with it (evaluated at n_ref=50000).
ENDEMIC_REFERENCE_STATE = np.array([4766.84, 2019.66, 943.06, 28621.89,
                                    362.66, 56.29, 31.39, 55.15,
                                    495.68, 112.33])
DFE_REFERENCE_R_PAIR = (0.62632, 0.55077)

# Treatment family: total population after 20 years, with and without TB
# treatment of singly-infected people (deaths on).
TREATMENT_N20_WITH = 29758.0
TREATMENT_N20_WITHOUT = 10509.0

_PERTURBATION_SEED = 20260822


@dataclass
class ScenarioSpec:
    name: str
    params: Parameters
    overrides: dict = field(default_factory=dict)
    initial_state: Optional[np.ndarray] = None
    horizon: float = 0.0
    report_times: Optional[np.ndarray] = None
    n_ref: Optional[float] = None     # None: time-varying denominator

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")


@dataclass
class AssertionRecord:
    name: str
    expected: float
    actual: float
    tolerance: float
    passed: Optional[bool]     # None marks an informational row

    @property
    def status(self) -> str:
        if self.passed is None:
            return "info"
        return "pass" if self.passed else "fail"


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    trajectories: Dict[str, Trajectory] = field(default_factory=dict)
    terminal_states: Dict[str, np.ndarray] = field(default_factory=dict)
    equilibria: Dict[str, EquilibriumReport] = field(default_factory=dict)
    repro: Dict[str, ReproductionNumbers] = field(default_factory=dict)
    comparisons: Dict[str, float] = field(default_factory=dict)
    assertions: List[AssertionRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions if a.passed is not None)


def initial_state() -> np.ndarray:
    """The standard starting census: 50000 people split by INITIAL_FRACTIONS."""
    return INITIAL_FRACTIONS * INITIAL_POPULATION


def default_parameters(beta1: float, beta2: float) -> Parameters:
    return Parameters(beta1=beta1, beta2=beta2)


def _record(result: ScenarioResult, name: str, expected: float, actual: float,
            tolerance: float) -> None:
    result.assertions.append(AssertionRecord(
        name=name, expected=expected, actual=actual, tolerance=tolerance,
        passed=bool(abs(actual - expected) <= tolerance)))


def _record_info(result: ScenarioResult, name: str, actual: float) -> None:
    result.assertions.append(AssertionRecord(
        name=name, expected=math.nan, actual=actual, tolerance=math.nan,
        passed=None))


def run_table2(params: Optional[Parameters] = None) -> ScenarioResult:
    """TB transmission sweep: R1 and the endemic active-TB count per row.

    Rows are solved on the 4-compartment TB submodel with the denominator
    pinned at the disease-free population, the convention the reference
    values were generated under. A zero-transmission sanity row is appended.
    """
    base = params if params is not None else default_parameters(0.0, 0.0)
    n_ref = base.Lambda / base.mu
    spec = ScenarioSpec(name="table2", params=base,
                        overrides={"beta1": sorted(TB_SWEEP_REFERENCE)},
                        n_ref=n_ref)
    result = ScenarioResult(spec=spec)
    for beta1 in sorted(TB_SWEEP_REFERENCE):
        p = dataclasses.replace(base, beta1=beta1, beta2=0.0)
        key = f"beta1={beta1:g}"
        report = hiv_free(p, n_ref=n_ref)
        result.equilibria[key] = report
        result.repro[key] = report.repro
        r1_expect, it_expect = TB_SWEEP_REFERENCE[beta1]
        _record(result, f"{key} R1", r1_expect, report.repro.r1, 5e-5)
        # Sub-person reference counts are threshold artifacts; compare those
        # in absolute persons, everything else relatively.
        it_tol = 0.01 if it_expect < 1.0 else 0.005 * it_expect
        _record(result, f"{key} active-TB equilibrium", it_expect,
                float(report.state[2]), it_tol)
    zero = hiv_free(dataclasses.replace(base, beta1=0.0, beta2=0.0), n_ref=n_ref)
    result.equilibria["beta1=0"] = zero
    _record(result, "beta1=0 R1", 0.0, zero.repro.r1, 0.0)
    _record(result, "beta1=0 no endemic state", 0.0,
            float(zero.exists), 0.0)
    return result


def run_table3(params: Optional[Parameters] = None) -> ScenarioResult:
    """HIV transmission sweep: R2 and the equilibrium HIV/AIDS counts.

    Each row is computed twice: the closed form with the denominator pinned
    at the disease-free population (the reference convention) and the fully
    self-consistent submodel solve, reported side by side. The known
    inconsistent reference cells fail here by design.
    """
    base = params if params is not None else default_parameters(0.0, 0.0)
    n_h = base.Lambda / base.mu
    spec = ScenarioSpec(name="table3", params=base,
                        overrides={"beta2": sorted(HIV_SWEEP_REFERENCE)},
                        n_ref=n_h)
    result = ScenarioResult(spec=spec)
    ratio = base.rho1 / (base.alpha1 + base.mu + base.dA)
    for beta2 in sorted(HIV_SWEEP_REFERENCE):
        p = dataclasses.replace(base, beta1=0.0, beta2=beta2)
        key = f"beta2={beta2:g}"
        closed = tb_free_closed(p, n_h)
        numeric = tb_free_numeric(p)
        result.equilibria[key] = numeric
        result.repro[key] = r0(p, None)
        r2_expect, ih_expect, a_expect = HIV_SWEEP_REFERENCE[beta2]
        r2_val = r2_closed(p, n_h)
        _record(result, f"{key} R2", r2_expect, r2_val, 5e-5)
        _record(result, f"{key} HIV equilibrium (pinned)", ih_expect,
                closed.i_h, 0.002 * ih_expect)
        _record(result, f"{key} AIDS equilibrium (pinned)", a_expect,
                closed.a, 0.002 * a_expect)
        if closed.exists:
            _record(result, f"{key} AIDS/HIV ratio identity", ratio,
                    closed.a / closed.i_h, 1e-8)
        if numeric.exists:
            _record(result, f"{key} AIDS/HIV ratio identity (self-consistent)",
                    ratio, float(numeric.state[5] / numeric.state[4]), 1e-8)
        result.comparisons[f"{key} HIV equilibrium (self-consistent)"] = \
            float(numeric.state[4])
        result.comparisons[f"{key} AIDS equilibrium (self-consistent)"] = \
            float(numeric.state[5])
    return result


def _perturbed_starts(n: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Initial censuses with infected fractions jittered by up to 10%."""
    starts = []
    for _ in range(n):
        fractions = INITIAL_FRACTIONS.copy()
        jitter = 1.0 + rng.uniform(-0.1, 0.1, size=len(INFECTED_INDICES))
        fractions[list(INFECTED_INDICES)] *= jitter
        fractions /= fractions.sum()
        starts.append(fractions * INITIAL_POPULATION)
    return starts


def run_dfe_stability(params: Optional[Parameters] = None,
                      n_perturbed: int = 5) -> ScenarioResult:
    """Subthreshold long-run behavior: every start decays to the
    disease-free state.

    Uses the full time-varying model over 500 years. The infected classes
    are below one person well before the horizon; the recovered-TB class
    drains at the slow demographic rate, which is why the horizon is longer
    than the infected decay alone would need.
    """
    base = params if params is not None else default_parameters(2.7, 0.03)
    horizon = 500.0
    spec = ScenarioSpec(name="dfe-stability", params=base,
                        initial_state=initial_state(), horizon=horizon)
    result = ScenarioResult(spec=spec)
    rng = np.random.default_rng(_PERTURBATION_SEED)
    starts = {"base": initial_state()}
    for i, s in enumerate(_perturbed_starts(n_perturbed, rng), start=1):
        starts[f"perturbed-{i}"] = s

    def rhs(t, y):
        return full_rhs(y, base)

    for key, y0 in starts.items():
        traj = integrate(rhs, y0, 0.0, horizon, params=base)
        result.trajectories[key] = traj
        result.terminal_states[key] = traj.final
        infected_max = float(np.max(traj.final[list(INFECTED_INDICES)]))
        _record(result, f"{key} infected below 1 person at {horizon:g}y",
                0.0, infected_max, 1.0)

    dfe = np.zeros(10)
    dfe[0] = base.Lambda / base.mu
    dominant = max(e.real for e in eigenvalues(jacobian(dfe, base)))
    result.comparisons["disease-free dominant eigenvalue"] = dominant
    result.assertions.append(AssertionRecord(
        name="disease-free state locally stable (dominant eigenvalue < -1e-7)",
        expected=0.0, actual=dominant, tolerance=1e-7,
        passed=bool(dominant < -1e-7)))

    pair = r0(base, INITIAL_POPULATION)
    result.repro["initial-census scale"] = pair
    _record(result, "R1 at the initial census scale",
            DFE_REFERENCE_R_PAIR[0], pair.r1, 5e-5)
    _record(result, "R2 at the initial census scale",
            DFE_REFERENCE_R_PAIR[1], pair.r2, 5e-5)
    return result


def run_syndemic_stability(params: Optional[Parameters] = None,
                           n_perturbed: int = 5) -> ScenarioResult:
    """Supercritical long-run behavior: every start settles on the same
    fully endemic state, which matches the curated reference vector.

    Runs under the 50000-pinned denominator, the convention the reference
    state was generated under; the pinned-system linearization at the
    settled state must be stable.
    """
    base = params if params is not None else default_parameters(6.0, 0.1)
    n_ref = INITIAL_POPULATION
    horizon = 500.0
    spec = ScenarioSpec(name="syndemic-stability", params=base,
                        initial_state=initial_state(), horizon=horizon,
                        n_ref=n_ref)
    result = ScenarioResult(spec=spec)
    rng = np.random.default_rng(_PERTURBATION_SEED)
    starts = {"base": initial_state()}
    for i, s in enumerate(_perturbed_starts(n_perturbed, rng), start=1):
        starts[f"perturbed-{i}"] = s

    def rhs(t, y):
        return full_rhs(y, base, n_ref)

    finals = {}
    for key, y0 in starts.items():
        traj = integrate(rhs, y0, 0.0, horizon, params=base)
        result.trajectories[key] = traj
        result.terminal_states[key] = traj.final
        finals[key] = traj.final

    keys = list(finals)
    worst_pair = 0.0
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            dev = np.max(np.abs(finals[keys[i]] - finals[keys[j]])
                         / np.maximum(np.abs(finals[keys[i]]), 1e-9))
            worst_pair = max(worst_pair, float(dev))
    _record(result, "cross-start terminal agreement (relative)", 0.0,
            worst_pair, 1e-3)

    newton = syndemic(base, initial_state(), n_ref=n_ref)
    result.equilibria["newton"] = newton
    result.repro["pinned scale"] = newton.repro
    dev_newton = float(np.max(np.abs(newton.state - ENDEMIC_REFERENCE_STATE)
                              / ENDEMIC_REFERENCE_STATE))
    _record(result, "newton equilibrium vs reference (max relative)", 0.0,
            dev_newton, 0.01)
    dev_integ = float(np.max(np.abs(finals["base"] - ENDEMIC_REFERENCE_STATE)
                             / ENDEMIC_REFERENCE_STATE))
    _record(result, "integrated state vs reference (max relative)", 0.0,
            dev_integ, 0.01)
    dev_paths = float(np.max(np.abs(finals["base"] - newton.state)
                             / np.maximum(np.abs(newton.state), 1e-9)))
    _record(result, "integration and root-finding agree (max relative)", 0.0,
            dev_paths, 1e-3)

    dominant = max(e.real
                   for e in eigenvalues(jacobian(newton.state, base, n_ref)))
    result.comparisons["endemic dominant eigenvalue (pinned)"] = dominant
    result.assertions.append(AssertionRecord(
        name="endemic state locally stable under the pinned denominator",
        expected=0.0, actual=dominant, tolerance=1e-7,
        passed=bool(dominant < -1e-7)))
    return result


_TREATMENT_FAMILIES = {
    # family -> treatment rates zeroed in the without arm (minimal reading),
    # and additionally in the alternative arm (cross-compartment reading).
    "tb": ({"tau1": 0.0, "tau2": 0.0}, {"tau3": 0.0, "tau4": 0.0}),
    "aids": ({"alpha1": 0.0}, {"alpha2": 0.0}),
    "coinfection": ({"tau3": 0.0, "tau4": 0.0, "alpha2": 0.0},
                    {"tau1": 0.0, "tau2": 0.0, "alpha1": 0.0}),
}


def run_treatment_impact(params: Optional[Parameters] = None,
                         family: str = "tb",
                         deaths: str = "on") -> ScenarioResult:
    """Twenty-year treatment comparison for one treatment family.

    Arms: with-treatment (all rates as given), without-treatment (the
    family's rates zeroed), and without-treatment-alt (the corresponding
    rates in the other infection classes zeroed too; reported because the
    reference experiments do not pin down which reading they used). With
    deaths off, all disease-induced death rates are zeroed in every arm and
    the total population follows a closed-form demographic decay.
    """
    if family not in _TREATMENT_FAMILIES:
        raise ValueError(f"unknown treatment family: {family!r}")
    if deaths not in ("on", "off"):
        raise ValueError("deaths must be 'on' or 'off'")
    base = params if params is not None else default_parameters(13.0, 0.06)
    if deaths == "off":
        base = dataclasses.replace(base, dT=0.0, dA=0.0, dTA=0.0)
    zeroed, extra = _TREATMENT_FAMILIES[family]
    arms = {
        "with-treatment": base,
        "without-treatment": dataclasses.replace(base, **zeroed),
        "without-treatment-alt": dataclasses.replace(base, **zeroed, **extra),
    }
    horizon = 20.0
    grid = np.linspace(0.0, horizon, 241)
    n_ref = INITIAL_POPULATION
    spec = ScenarioSpec(name=f"treatment-{family}-deaths-{deaths}",
                        params=base,
                        overrides={"without": zeroed, "alt": extra,
                                   "deaths": deaths},
                        initial_state=initial_state(), horizon=horizon,
                        report_times=grid, n_ref=n_ref)
    result = ScenarioResult(spec=spec)
    y0 = initial_state()
    for key, p in arms.items():
        traj = integrate(lambda t, y, _p=p: full_rhs(y, _p, n_ref),
                         y0, 0.0, horizon, report_times=grid, params=p)
        result.trajectories[key] = traj
        result.terminal_states[key] = traj.final
        result.comparisons[f"{key} N(20)"] = total_population(traj.final)
        result.repro[key] = r0(p, n_ref)

    n20 = {k: total_population(result.terminal_states[k]) for k in arms}
    if deaths == "off":
        # With all disease deaths off, N obeys dN/dt = Lambda - mu N exactly.
        n_inf = base.Lambda / base.mu
        analytic = n_inf + (INITIAL_POPULATION - n_inf) * math.exp(-horizon * base.mu)
        for key in arms:
            _record(result, f"{key} N(20) matches demographic decay",
                    analytic, n20[key], 1.0)
    elif family == "tb":
        _record(result, "with-treatment N(20)", TREATMENT_N20_WITH,
                n20["with-treatment"], 0.05 * TREATMENT_N20_WITH)
        _record(result, "without-treatment N(20)", TREATMENT_N20_WITHOUT,
                n20["without-treatment"], 0.05 * TREATMENT_N20_WITHOUT)
        _record_info(result, "without-treatment-alt N(20)",
                     n20["without-treatment-alt"])

    if family == "aids" and deaths == "on":
        a_with = float(result.terminal_states["with-treatment"][5])
        a_without = float(result.terminal_states["without-treatment"][5])
        result.assertions.append(AssertionRecord(
            name="AIDS count at 20y higher without treatment",
            expected=0.0, actual=a_without - a_with, tolerance=0.0,
            passed=bool(a_without > a_with)))

    if family == "coinfection":
        wo = result.trajectories["without-treatment"]
        r_th_max = float(np.max(np.abs(wo.states[:, 8])))
        _record(result, "untreated arm recovered-coinfection stays zero",
                0.0, r_th_max, 1e-9)
        with_i = result.trajectories["with-treatment"]
        crossing = _first_crossing(with_i, wo, component=7, after=0.1)
        result.comparisons["coinfected crossover year"] = crossing
        if deaths == "off":
            result.assertions.append(AssertionRecord(
                name="active coinfection drops below the treated arm near year 7",
                expected=7.0, actual=crossing, tolerance=1.5,
                passed=bool(abs(crossing - 7.0) <= 1.5)))
        else:
            _record_info(result, "coinfected crossover year", crossing)
    return result


def _first_crossing(with_traj: Trajectory, without_traj: Trajectory,
                    component: int, after: float) -> float:
    """First reported time where the untreated arm falls below the treated."""
    times = with_traj.times
    a = with_traj.states[:, component]
    b = without_traj.states[:, component]
    for t, va, vb in zip(times, a, b):
        if t > after and vb < va:
            return float(t)
    return math.inf


def _atomic_write(path: Path, rows: Sequence[Sequence], header: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{x:.10g}"


def write_scenario_csv(result: ScenarioResult, out_dir) -> List[Path]:
    """One CSV per trajectory plus a summary CSV of the scalar assertions.

    Trajectory files: time in years, the ten compartments in model order,
    and the total. Files are written atomically (temp file then rename).
    """
    out = Path(out_dir)
    written = []
    grid = result.spec.report_times
    for key, traj in result.trajectories.items():
        if grid is not None:
            pairs = [(t, traj.at(t)) for t in grid]
        else:
            pairs = zip(traj.times, traj.states)
        rows = [[_format(t)] + [_format(v) for v in y] + [_format(y.sum())]
                for t, y in pairs]
        path = out / f"{result.spec.name}__{key}.csv"
        _atomic_write(path, rows, ["time_years", *COMPARTMENTS, "total"])
        written.append(path)
    summary_rows = [[a.name, _format(a.expected), _format(a.actual),
                     _format(a.tolerance), a.status]
                    for a in result.assertions]
    for name, value in result.comparisons.items():
        summary_rows.append([name, "", _format(value), "", "info"])
    path = out / f"{result.spec.name}__summary.csv"
    _atomic_write(path, summary_rows,
                  ["name", "expected", "actual", "tolerance", "status"])
    written.append(path)
    return written
