"""Experiment drivers behind the CLI verbs.

Every run writes into its output directory:

* ``diagnostics.ndjson``: a config echo line, then one record per sample
  time, then fits and a summary.  No wall-clock values, so repeated runs are
  byte-identical.
* ``config.toml``: the fully resolved configuration.
* ``final.dkg`` (evolving runs), optional ``snap_t*.dkg``, and
  ``last_good.dkg`` plus a ``failure`` record if the state blows up.
* ``decay_*.csv`` mirrors of the decay series and PNG figures.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import field_grid as fg
from .. import propagators as pr
from .. import spinor_core as sc
from ..analysis import energy as en
from ..analysis import fits
from ..analysis import scattering as scat
from ..analysis import structure as st
from ..analysis import transforms as tr
from ..evolver import NumericalError, SimState, advance, evolve, make_initial_data
from ..identities import run_identity_suite
from . import report
from .config import ConfigError, config_hash, data_spec, to_toml
from .snapshot import read_snapshot, write_snapshot

log = logging.getLogger(__name__)

DIAGNOSTICS = "diagnostics.ndjson"
CONFIG_ECHO = "config.toml"
FINAL_SNAPSHOT = "final.dkg"
LAST_GOOD = "last_good.dkg"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


@dataclass
class RunResult:
    exit_code: int
    out: Path
    summary: dict = field(default_factory=dict)


def provenance(cfg: dict) -> dict:
    """The part of the config that determines the numbers (everything but the output path)."""
    return {k: v for k, v in cfg.items() if k != "out"}


class _Run:
    def __init__(self, cfg: dict, kind: str):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / CONFIG_ECHO).write_text(to_toml(cfg), encoding="utf-8")
        self.hash = config_hash(provenance(cfg))
        self.nd = report.NdjsonWriter(self.out / DIAGNOSTICS, self.hash)
        self.nd.write("config", run=kind, config=provenance(cfg))
        self.figures = bool(cfg["diagnostics"]["figures"])

    def close(self):
        self.nd.close()


def _on_cadence(t: float, every: float) -> bool:
    k = t / every
    return abs(k - round(k)) < 1e-6


def _grid(cfg: dict) -> fg.SpectralGrid:
    return fg.SpectralGrid(cfg["grid"]["n"], float(cfg["grid"]["L"]))


def _fit(times, values, window, t_wrap) -> fits.DecayFit | report.Missing:
    try:
        return fits.decay_fit(times, values, window, t_wrap)
    except ValueError as exc:
        return report.Missing(str(exc))


def _fit_record(fit) -> Any:
    return fit if isinstance(fit, report.Missing) else fit.as_record()


# ------------------------------------------------------------- identities


def run_identities(cfg: dict) -> RunResult:
    run = _Run(cfg, "identities")
    try:
        started = time.perf_counter()
        results = run_identity_suite(seed=cfg["seed"], trials=cfg["diagnostics"]["trials"])
        log.info("identity suite took %.3f s", time.perf_counter() - started)
        for r in results:
            run.nd.write("identity", **r.as_record())
        failed = [r.name for r in results if not r.passed]
        summary = {"checks": len(results), "failed": failed, "passed": not failed}
        run.nd.write("summary", **summary)
    finally:
        run.close()
    return RunResult(EXIT_OK if not failed else EXIT_NUMERICAL, run.out, summary)


# ------------------------------------------------------------- free decay


def _sup_series(state: SimState) -> dict[str, float]:
    g, t = state.grid, state.t
    w = fg.weight_field("jtpr", t, g).data
    return {
        "psi_l2": fg.reduce_norm(state.psi, g),
        "psi_linf": fg.reduce_norm(state.psi, g, kind="Linf"),
        "v_linf": fg.reduce_norm(state.v, g, kind="Linf"),
        "v_weighted_linf": fg.reduce_norm(w * state.v, g, kind="Linf"),
    }


def run_free_decay(cfg: dict) -> RunResult:
    """Sample the exact linear flows of the initial data and fit their sup-norm decay."""
    run = _Run(cfg, "free-decay")
    try:
        g = _grid(cfg)
        spec = data_spec(cfg)
        s0 = make_initial_data(spec, g)
        t_wrap = fits.wrap_time(g.L, spec.support_radius())
        it = cfg["integrator"]
        cadence = it["dt"] * it["sample_every"]
        count = int(round(it["T"] / cadence))
        run.nd.write("start", t_wrap=t_wrap, support_radius=spec.support_radius(), samples=count + 1)
        series: dict[str, list] = {"psi_linf": [], "v_linf": [], "v_weighted_linf": []}
        times = []
        kg0 = s0.kg
        for j in range(count + 1):
            t = j * cadence
            psi = pr.dirac_free_flow(s0.psi, t, g)
            kg = pr.kg_free_flow(kg0, t, g)
            s = SimState(g, t, psi, kg.u, kg.ut)
            rec = _sup_series(s)
            rec["E1"] = pr.kg_energy(kg, g)
            run.nd.write("sample", t=t, **rec)
            times.append(t)
            for k in series:
                series[k].append(rec[k])
        window = tuple(cfg["diagnostics"]["fit_window"])
        fitted = {k: _fit(times, series[k], window, t_wrap) for k in ("psi_linf", "v_linf", "v_weighted_linf")}
        for k, f in fitted.items():
            run.nd.write("fit", series=k, fit=_fit_record(f))
            report.write_series_csv(run.out / f"decay_{k}.csv", times, series[k])
        summary = {k + "_slope": (f.slope if not isinstance(f, report.Missing) else f) for k, f in fitted.items()}
        run.nd.write("summary", **summary)
        if run.figures:
            report.plot_decay(
                run.out / "decay.png",
                {k: (times, series[k]) for k in ("psi_linf", "v_linf")},
                {k: f for k, f in fitted.items() if not isinstance(f, report.Missing)},
                title="free flows: sup-norm decay",
            )
    finally:
        run.close()
    return RunResult(EXIT_OK, run.out, {k: v for k, v in summary.items()})


# ---------------------------------------------------------- coupled runs


class _Trajectory:
    """Sink collecting the per-sample diagnostics of a coupled run."""

    def __init__(self, run: _Run, g: fg.SpectralGrid):
        self.run, self.g = run, g
        self.cfg = run.cfg
        self.diag = self.cfg["diagnostics"]
        self.ledger: en.EnergyLedger | None = None
        self.times: list[float] = []
        self.series: dict[str, list[float]] = {"psi_linf": [], "v_weighted_linf": [], "psi_minus_linf": []}
        self.energies: dict[str, list[float]] = {"ED": [], "G1": [], "E1": []}
        self.profiles: list[scat.Profile] = []

    def __call__(self, s: SimState) -> None:
        g, t, dg = self.g, s.t, self.diag
        rec: dict[str, Any] = _sup_series(s)
        rec["psi_minus_linf"] = _minus_linf(s)
        rec["psi_linf_sqrt_t"] = rec["psi_linf"] * np.sqrt(t)
        self.times.append(t)
        for k in self.series:
            self.series[k].append(rec[k])

        if s.has_aux:
            rec["aux_identity"] = tr.aux_identity_residual(s) if np.any(s.psi) else report.Missing("psi is zero")
        if dg["energies"]:
            self.ledger = en.energy_snapshot(s, self.ledger, self.cfg["exponents"]["delta"],
                                             self.cfg["exponents"]["delta1"])
            led = self.ledger.as_record()
            led.pop("t")
            for k in ("E0", "F_conformal"):
                if led[k] is None:
                    led[k] = report.Missing("auxiliary field disabled")
            rec["ledger"] = led
            for k in self.energies:
                self.energies[k].append(led[k])
        if dg["transforms"] and _on_cadence(t, dg["transform_every"]):
            rec["residuals"] = self._residuals(s)
        if dg["structure"] and _on_cadence(t, dg["transform_every"]) and t > 0:
            rec["dirac_gradient_ratio"] = st.dirac_gradient_ratio(s)
            rec["kg_interior_ratio"] = st.kg_interior_ratio(s)
        if dg["scattering"] and _on_cadence(t, dg["scatter_every"]):
            self.profiles.append(scat.free_profile(t, s.psi, s.v, s.vt, g))
        if dg["snapshot_every"] > 0 and _on_cadence(t, dg["snapshot_every"]):
            name = f"snap_t{t:010.4f}.dkg"
            write_snapshot(s, self.run.out / name)
            rec["snapshot"] = name
        self.run.nd.write("sample", t=t, **rec)

    def _residuals(self, s: SimState) -> dict:
        it = self.cfg["integrator"]
        wanted = tr.SELECTORS if s.has_aux else ("psi_tilde", "v_tilde")
        out: dict[str, Any] = dict(tr.transform_residuals(s, it["dt"], it["dealias"], wanted))
        for k in tr.SELECTORS:
            out.setdefault(k, report.Missing("auxiliary field disabled"))
        return out


def _minus_linf(s: SimState) -> float:
    return fg.reduce_norm(sc.radial_projection(s.psi, s.grid.omega, "-"), s.grid, kind="Linf")


def _coupled(cfg: dict, state: SimState, kind: str) -> RunResult:
    run = _Run(cfg, kind)
    try:
        return _coupled_body(run, cfg, state)
    finally:
        run.close()


def _coupled_body(run: _Run, cfg: dict, state: SimState) -> RunResult:
    g = state.grid
    spec = data_spec(cfg)
    t_wrap = fits.wrap_time(g.L, spec.support_radius())
    start: dict[str, Any] = {"t": state.t, "t_wrap": t_wrap, "has_aux": state.has_aux}
    if state.t == 0:
        start["smallness_norm"] = st.smallness_norm(state)
        start["dirac_energy_bound"] = en.dirac_energy_bound(state.psi, g)
    run.nd.write("start", **start)

    it = cfg["integrator"]
    traj = _Trajectory(run, g)
    try:
        res = evolve(state, float(it["T"]), it["dt"], it["sample_every"], [traj], it["dealias"])
    except NumericalError as exc:
        write_snapshot(exc.last_good, run.out / LAST_GOOD)
        run.nd.write("failure", message=str(exc), t_last_good=exc.last_good.t, snapshot=LAST_GOOD)
        return RunResult(EXIT_NUMERICAL, run.out, {"failure": str(exc)})
    final = res.state
    write_snapshot(final, run.out / FINAL_SNAPSHOT)

    window = tuple(cfg["diagnostics"]["fit_window"])
    fitted = {k: _fit(traj.times, v, window, t_wrap) for k, v in traj.series.items()}
    for k, f in fitted.items():
        run.nd.write("fit", series=k, fit=_fit_record(f))
        report.write_series_csv(run.out / f"decay_{k}.csv", traj.times, traj.series[k])
    summary: dict[str, Any] = {
        "t_final": final.t,
        "snapshot": FINAL_SNAPSHOT,
        "psi_l2_final": fg.reduce_norm(final.psi, g),
    }
    for k, f in fitted.items():
        summary[f"{k}_slope"] = f if isinstance(f, report.Missing) else f.slope

    if cfg["diagnostics"]["scattering"]:
        if len(traj.profiles) >= 3:
            trace = scat.scattering_trace(traj.profiles, g)
            for r in trace.as_records():
                run.nd.write("scatter_pair", **r)
            check = scat.tail_is_decreasing(trace, cfg["diagnostics"]["scatter_from"])
            run.nd.write("scatter_check", t_from=cfg["diagnostics"]["scatter_from"], **check)
            summary["scattering"] = check
            if run.figures:
                report.plot_lines(
                    run.out / "scattering.png",
                    {"dirac L2": (trace.times[1:], trace.dirac_l2), "KG energy": (trace.times[1:], trace.kg_energy)},
                    "t", "consecutive profile difference", "scattering profiles", logy=True,
                )
        else:
            summary["scattering"] = report.Missing("fewer than 3 profiles in the run")
    run.nd.write("summary", **summary)

    if run.figures:
        report.plot_decay(
            run.out / "decay.png",
            {k: (traj.times, v) for k, v in traj.series.items()},
            {k: f for k, f in fitted.items() if not isinstance(f, report.Missing)},
            title="coupled run: sup-norm decay",
        )
        if traj.ledger is not None:
            report.plot_lines(run.out / "energies.png", {k: (traj.times, v) for k, v in traj.energies.items()},
                              "t", "energy", "energy ledger")
    return RunResult(EXIT_OK, run.out, summary)


def run_dkg(cfg: dict) -> RunResult:
    g = _grid(cfg)
    return _coupled(cfg, make_initial_data(data_spec(cfg), g), "dkg-small")


def run_resume(cfg: dict, snapshot: str | Path) -> RunResult:
    """Continue a coupled run from a snapshot up to integrator.T."""
    state = read_snapshot(snapshot)
    g = state.grid
    if g.n != cfg["grid"]["n"] or g.L != float(cfg["grid"]["L"]):
        raise ConfigError("grid", f"snapshot grid ({g.n}, {g.L}) differs from the config grid "
                                  f"({cfg['grid']['n']}, {cfg['grid']['L']})")
    if state.t > cfg["integrator"]["T"]:
        raise ConfigError("integrator.T", f"snapshot time {state.t} is past T = {cfg['integrator']['T']}")
    return _coupled(cfg, state, "resume")


# ------------------------------------------------------------- convergence


def run_convergence(cfg: dict) -> RunResult:
    """Residuals of the transformed equations at a fixed time under dt refinement."""
    run = _Run(cfg, "convergence")
    try:
        g = _grid(cfg)
        s0 = make_initial_data(data_spec(cfg), g)
        dg, dealias = cfg["diagnostics"], cfg["integrator"]["dealias"]
        dts = sorted(dg["convergence_dts"], reverse=True)
        wanted = tr.SELECTORS if s0.has_aux else ("psi_tilde", "v_tilde")
        table: dict[float, dict[str, float]] = {}
        for dt in dts:
            s = advance(s0, dg["convergence_t"], dt, dealias)
            if not s.is_finite():
                write_snapshot(s0, run.out / LAST_GOOD)
                run.nd.write("failure", message=f"non-finite state with dt = {dt}", t_last_good=0.0,
                             snapshot=LAST_GOOD)
                return RunResult(EXIT_NUMERICAL, run.out, {"failure": f"dt = {dt}"})
            res = tr.transform_residuals(s, dt, dealias, wanted)
            if s.has_aux:
                res["aux_identity"] = tr.aux_identity_residual(s)
            table[dt] = res
            run.nd.write("convergence", dt=dt, t=s.t, residuals=res)
        ratios = {
            k: [table[a][k] / table[b][k] if table[b][k] > 0 else report.Missing("zero residual")
                for a, b in zip(dts, dts[1:])]
            for k in wanted
        }
        summary = {"dts": dts, "ratios": ratios}
        run.nd.write("summary", **summary)
        if run.figures:
            report.plot_lines(run.out / "convergence.png", {k: (dts, [table[d][k] for d in dts]) for k in wanted},
                              "dt", "residual (L2)", "transformed-equation residuals", logy=True, logx=True)
    finally:
        run.close()
    return RunResult(EXIT_OK, run.out, summary)


RUNNERS = {
    "identities": run_identities,
    "free-decay": run_free_decay,
    "dkg-small": run_dkg,
    "convergence": run_convergence,
}


def run_experiment(cfg: dict) -> RunResult:
    """Dispatch on cfg['preset']."""
    return RUNNERS[cfg["preset"]](cfg)
