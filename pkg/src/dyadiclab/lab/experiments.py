"""Experiment kinds. Each takes a resolved config and returns an
``Outcome``: JSON-ready results, verdicts against named contracts,
step statistics and tabular artifacts for the report writer."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import diagnostics as dg
from .. import invariant_region as ir
from .. import stationary as st
from ..shell_model import Formulation, ModelParams, y_to_x
from ..stepper import BlowupNorm, StepControl, TerminationCause, integrate
from .config import ExperimentConfig


@dataclass
class Verdict:
    contract: str
    passed: bool
    value: object = None
    threshold: object = None

    def to_dict(self):
        return {"contract": self.contract, "passed": bool(self.passed),
                "value": _jsonable(self.value), "threshold": _jsonable(self.threshold)}


@dataclass
class Outcome:
    results: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    series: dict = field(default_factory=dict)  # plot series name -> dict of columns

    def check(self, contract, passed, value=None, threshold=None):
        self.verdicts.append(Verdict(contract, bool(passed), value, threshold))


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


# ------------------------------------------------------------ helpers

def model_params(cfg: ExperimentConfig, **changes) -> ModelParams:
    m = dict(cfg["model"])
    m.update(changes)
    return ModelParams(**m)


def step_control(cfg: ExperimentConfig, **changes) -> StepControl:
    s = dict(cfg["step"])
    s["max_step"] = math.inf if s["max_step"] is None else s["max_step"]
    s.update(changes)
    return StepControl(**s)


def region_for(cfg: ExperimentConfig, beta: float, eps: float) -> ir.RegionSpec:
    r = cfg["region"]
    return ir.RegionSpec.for_model(beta, eps, delta=r["delta"], theta=r["theta"], m=r["m"])


def initial_state(cfg: ExperimentConfig, params: ModelParams) -> np.ndarray:
    """Initial amplitudes in the run's own formulation."""
    ini, n = cfg["initial"], params.n_shells
    if ini["type"] == "power_law":
        return 2.0 ** (-ini["g"] * np.arange(1, n + 1, dtype=float))
    if ini["type"] == "explicit":
        x = np.zeros(n)
        x[:len(ini["values"])] = ini["values"]
        return x
    rng = np.random.default_rng(cfg["seed"])
    y = ir.random_initial(region_for(cfg, params.beta, params.epsilon), n, rng, ini["margin"])
    if params.formulation is Formulation.Y:
        return y
    return y_to_x(y, params.replace(formulation=Formulation.Y))


def sample_times(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg["horizon"], cfg["samples"])


def pmap(fn, items, workers: int):
    """Ordered map, in a process pool when ``workers`` > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _steps(trajs) -> dict:
    return {"runs": len(trajs), "accepted": int(sum(t.accepted for t in trajs)),
            "rejected": int(sum(t.rejected for t in trajs))}


def half_eps_star(cfg: ExperimentConfig) -> float:
    e = cfg["epsilon_search"]
    spec = ir.RegionSpec(delta=cfg["region"]["delta"], theta=cfg["region"]["theta"],
                         m=cfg["region"]["m"])
    grid = np.logspace(math.log10(e["eps_lo"]), math.log10(e["eps_hi"]), e["n_eps"])
    res = ir.find_epsilon(spec, (e["beta_lo"], e["beta_hi"]), grid, e["grid_n"])
    return 0.5 * res.eps_star


# ------------------------------------------------------------ simulate

def run_simulate(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p = model_params(cfg)
    y0 = initial_state(cfg, p)
    stops = sample_times(cfg)
    tr = integrate(p, y0, cfg["horizon"], step_control(cfg), t_stops=stops[1:-1])
    vals = tr.at_stops(stops)
    out.stats = {**_steps([tr]), "methods": tr.summary()["methods"]}
    tol = cfg["tolerances"]
    norms = {"energy": dg.norm(vals, dg.EnergyH()).tolist(),
             "sobolev_beta_third": dg.norm(vals, dg.SobolevLike(p.beta / 3.0)).tolist(),
             "weighted_sup": dg.norm(vals, dg.WeightedSup(p.rescale_exponent)).tolist()}
    out.results = {"params": p.to_dict(), "initial": y0.tolist(), "trajectory": tr.summary(),
                   "final": tr.values[-1].tolist()}
    out.check("integration reaches the horizon", tr.cause is TerminationCause.TIME_REACHED,
              tr.cause.value, TerminationCause.TIME_REACHED.value)
    if p.n_shells == 1:
        exact = y0[0] * np.exp(-p.coefficients.d[0] * stops)
        err = float(np.max(np.abs(vals[:, 0] - exact)))
        out.results["single_shell_error"] = err
        out.check("single shell follows exp(-nu lambda^2 t)", err <= 1e-12 * max(1.0, abs(y0[0])),
                  err, 1e-12)
    if p.formulation is Formulation.X and not p.mirror:
        rep = dg.energy_inequality_report(tr, p.nu)
        out.results["energy"] = rep.to_dict()
        if p.nu == 0:
            out.check("inviscid energy conserved", rep.max_abs_drift <= tol["energy"],
                      rep.max_abs_drift, tol["energy"])
        else:
            out.check("energy inequality", rep.worst <= tol["energy"], rep.worst, tol["energy"])
    if p.formulation is Formulation.Y and cfg["initial"]["type"] == "in_region":
        spec = region_for(cfg, p.beta, p.epsilon)
        ex = ir.check_invariance(tr, spec, tol["invariance"], include_midpoints=True)
        out.results["region_exit"] = None if ex is None else ex.__dict__
        out.check("pairs stay in the invariant region", ex is None,
                  None if ex is None else ex.t, tol["invariance"])
    out.tables["timeseries"] = (stops, vals)
    out.series["timeseries"] = {"t": stops.tolist(), "values": vals.tolist()}
    out.series["norms"] = {"t": stops.tolist(), **norms}
    return out


# ------------------------------------------------------------ region

def psi_curves(spec: ir.RegionSpec, n: int = 401) -> dict:
    x1 = np.linspace(*ir.psi1_domain(spec), n)
    x2 = np.linspace(*ir.psi2_domain(spec), n)
    return {"psi1": {"x": x1.tolist(), "value": ir.psi1(x1, spec).tolist()},
            "psi2": {"x": x2.tolist(), "value": ir.psi2(x2, spec).tolist()}}


def run_region_verify(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    rv, r = cfg["region_verify"], cfg["region"]
    spec = ir.RegionSpec(delta=r["delta"], theta=r["theta"], m=r["m"])
    cert = ir.certify_psi_positive(spec, rv["grid_n"])
    eps = rv["eps"] if rv["eps"] is not None else half_eps_star(cfg)
    betas = ir.beta_grid(rv["beta_lo"], rv["beta_hi"], rv["n_beta"])
    flux = ir.flux_scan_betas(eps, betas, rv["resolution"], r["delta"], r["theta"], r["m"])
    out.results = {"region": spec.to_dict(), "certificate": cert.to_dict(), "eps": eps,
                   "flux": flux.to_dict(), "flux_overall_min": flux.overall_min}
    out.check("psi1 and psi2 certified positive", cert.certified,
              [cert.lower_bound_psi1, cert.lower_bound_psi2], 0.0)
    for s in flux.segments:
        for regime, val in (("viscous", s.viscous_min), ("inviscid", s.inviscid_min)):
            out.check(f"{s.name} {regime} inward flux nonnegative", val >= -rv["flux_tol"],
                      val, -rv["flux_tol"])
    out.series.update(psi_curves(spec))
    return out


def run_epsilon_search(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    e, r = cfg["epsilon_search"], cfg["region"]
    spec = ir.RegionSpec(delta=r["delta"], theta=r["theta"], m=r["m"])
    grid = np.logspace(math.log10(e["eps_lo"]), math.log10(e["eps_hi"]), e["n_eps"])
    res = ir.find_epsilon(spec, (e["beta_lo"], e["beta_hi"]), grid, e["grid_n"])
    out.results = res.to_dict()
    out.check("trouble bounds nonnegative at eps_star", res.certified,
              [res.min_trouble_1, res.min_trouble_2], 0.0)
    out.check("eps_star above the floor", res.eps_star >= e["eps_min"], res.eps_star, e["eps_min"])
    return out


# ------------------------------------------------------------ stationary

def run_stationary(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    s = cfg["stationary"]
    beta, nu = cfg["model"]["beta"], cfg["model"]["nu"]
    u = st.u_of_beta(beta)
    prof = st.find_a1(u, s["n_max"], s["tol"])
    rep = st.build_gamma(prof, nu, beta)
    band = st.decay_check(rep.gamma, beta)
    rng = np.random.default_rng(cfg["seed"])
    pairs = rng.uniform(prof.A, prof.B, size=(s["closure_samples"], 2))
    nxt = np.array([st.recursion_step(a, b, u) for a, b in pairs])
    closed = bool(np.all((nxt >= prof.A) & (nxt <= prof.B)))
    out.results = {"profile": prof.to_dict(), "gamma": rep.to_dict(),
                   "band": band.__dict__, "closure_samples": s["closure_samples"]}
    out.check("stationary equation residual", rep.max_scaled_residual <= s["residual_max"],
              rep.max_scaled_residual, s["residual_max"])
    out.check("partial-sum identity", rep.max_partial_sum_defect <= s["residual_max"],
              rep.max_partial_sum_defect, s["residual_max"])
    out.check("gamma_n < 0 beyond the first nonzero shell", band.negative_after_n0)
    out.check("decay band bounded away from zero", 0 < band.c1 <= band.c2 < math.inf,
              [band.c1, band.c2])
    out.check("[A, B] closed under the recursion", closed)
    return out


# ------------------------------------------------------------ nu sweep

def _sweep_member(job):
    params, x0, t_end, ctrl, stops = job
    return integrate(params, x0, t_end, ctrl, t_stops=stops)


def run_nu_sweep(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    s = cfg["nu_sweep"]
    nus = [2.0 ** -k for k in range(s["k_max"] + 1)] + ([0.0] if s["include_inviscid"] else [])
    base = model_params(cfg)
    x0 = initial_state(cfg, base)
    times = np.linspace(0.0, cfg["horizon"], s["n_times"])
    ctrl = step_control(cfg)
    jobs = [(base.replace(nu=nu), x0, cfg["horizon"], ctrl, times[1:-1]) for nu in nus]
    trajs = pmap(_sweep_member, jobs, cfg["workers"])
    cmp = dg.nu_sweep_compare(trajs, nus, min(s["n_compare"], base.n_shells), times, s["gamma"])
    out.stats = _steps(trajs)
    out.results = {"comparison": cmp.to_dict(),
                   "runs": [{"nu": nu, **t.summary()} for nu, t in zip(nus, trajs)]}
    for n in range(1, cmp.n_max + 1):
        out.check(f"D[k][{n}] decreasing in k", cmp.decreasing_in_k(n),
                  cmp.first_increase(n))
    if s["include_inviscid"]:
        gap = float(np.max(cmp.last_gap))
        out.check("last viscous run close to the inviscid run", gap <= s["last_gap_max"],
                  gap, s["last_gap_max"])
    out.check("C0 finite and uniform across the sweep",
              math.isfinite(cmp.c0) and cmp.c0_variation < s["c0_variation_max"],
              cmp.c0_variation, s["c0_variation_max"])
    rows = [[nus[k], n + 1, cmp.d[k, n]] for k in range(cmp.d.shape[0]) for n in range(cmp.n_max)]
    out.tables["D"] = (["nu", "shell", "D"], rows)
    return out


# ------------------------------------------------------------ blow-up

def _blowup_member(job):
    params, x0, t_end, ctrl, s, growth = job
    tr = integrate(params, x0, t_end, ctrl, events=[BlowupNorm(s, growth)])
    series = dg.norm(tr.values, dg.SobolevLike(s))
    return tr, series


def run_blowup_scan(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    b = cfg["blowup"]
    ctrl = step_control(cfg)
    jobs = []
    for beta in b["betas"]:
        p = model_params(cfg, beta=float(beta))
        jobs.append((p, initial_state(cfg, p), cfg["horizon"], ctrl, b["s_factor"] * beta,
                     b["growth"]))
    res = pmap(_blowup_member, jobs, cfg["workers"])
    out.stats = _steps([tr for tr, _ in res])
    runs = []
    for beta, (tr, series) in zip(b["betas"], res):
        ratio = float(np.max(series) / series[0])
        fired = tr.cause is TerminationCause.EVENT
        runs.append({"beta": beta, "fired": fired, "t_final": tr.t_final,
                     "max_growth": ratio, **tr.summary()})
        if beta > b["expect_blowup_above"]:
            out.check(f"beta={beta}: norm exceeds growth factor before horizon",
                      fired and tr.t_final < cfg["horizon"], ratio, b["growth"])
        else:
            out.check(f"beta={beta}: norm bounded on the horizon",
                      tr.cause is TerminationCause.TIME_REACHED and ratio < b["growth"],
                      ratio, b["growth"])
    out.results = {"runs": runs}
    return out


# ------------------------------------------------------------ claims

def run_claims_check(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    c = cfg["claims"]
    p = model_params(cfg)
    eps = c["eps"] if c["eps"] is not None else half_eps_star(cfg)
    x0 = initial_state(cfg, p)
    t_end = cfg["horizon"]

    run = dg.claim1_protocol(p.beta, eps, p.nu, x0, t_end, c["delta"], step_control(cfg))
    limit = c["ratio_slack"] / c["delta"]
    out.check("claim-1 weighted sup ratio", run.ratio <= limit, run.ratio, limit)

    loose = integrate(p, x0, t_end, step_control(cfg, rel_tol=c["loose_rel_tol"],
                                                 abs_tol=c["loose_rel_tol"] * 1e-2))
    tight = integrate(p, x0, t_end, step_control(cfg, rel_tol=c["tight_rel_tol"],
                                                 abs_tol=c["tight_rel_tol"] * 1e-2))
    n_gap = min(c["gap_shells"], p.n_shells)
    gap = dg.uniqueness_gap(loose, tight, n_gap).sup
    out.check(f"uniqueness gap psi_{n_gap}", gap <= c["gap_max"], gap, c["gap_max"])

    vc = dg.vcompare(tight, 0.0, p.nu, p.beta)
    out.check("comparison V <= V-tilde", vc.holds, vc.max_excess, 0.0)

    cons = dg.rescaled_consistency(p.beta, eps, p.nu, x0, min(t_end, 0.2), c["delta"])
    out.check("rescaled run solves the rescaled equation", cons["ok"],
              cons["max_deviation"], cons["bound"])
    results = {"eps": eps, "claim1": {"ratio": run.ratio, "ratio_y": run.ratio_y, "k0": run.k0,
                                      "alpha": run.alpha, "nu_bar": run.nu_bar},
               "gap": gap, "vcompare": {"max_excess": vc.max_excess, "holds": vc.holds,
                                        "t_valid": vc.t_valid, "truncated": vc.truncated},
               "rescaled_consistency": cons,
               "monitors": dg.uniqueness_monitors(tight, p.beta, eps)}
    if not p.mirror and p.formulation is Formulation.X:
        rep = dg.energy_inequality_report(tight, p.nu)
        results["energy"] = rep.to_dict()
        out.check("energy inequality", rep.worst <= cfg["tolerances"]["energy"], rep.worst,
                  cfg["tolerances"]["energy"])
    out.results = results
    out.stats = _steps([run.y_traj, loose, tight])
    return out


RUNNERS = {
    "simulate": run_simulate,
    "region-verify": run_region_verify,
    "epsilon-search": run_epsilon_search,
    "stationary": run_stationary,
    "nu-sweep": run_nu_sweep,
    "blowup-scan": run_blowup_scan,
    "claims-check": run_claims_check,
}
