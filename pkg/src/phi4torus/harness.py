"""Verb implementations, artifact writing and the run manifest.

Artifacts never contain wall-clock times, so re-running a configuration
reproduces them byte for byte; every artifact carries the run digest (hash
of the effective configuration and code version) and the seed. Wall times
live only in manifest.json.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .besov import block_norms, parse_exponent
from .config import Config
from .dynamics import SimConfig, step_sde
from .gibbs import GibbsConfig, default_observables, gibbs_sample, invariance_test, lowest_modes
from .ou import (NoiseStream, burn_in_trees, default_burn_in, ou_init_stationary, stationary_variance,
                 tree_convolved_step, tree_snapshot)
from .paracontrolled import EnergyParams, diagnostics_run
from .projections import projection_multiplier
from .renorm import renorm_constants
from .scans import commutator_scan
from .stats import StatReport, all_passed, format_reports, read_reports, reports_from_samples, write_reports
from .torus import read_snapshot, write_snapshot

OUTPUT_ENV = "PHI4_OUTPUT_DIR"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


@dataclass
class ArtifactWriter:
    """Writes artifacts into ``root`` and remembers their digests."""
    root: Path
    digest: str
    seed: int
    files: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def stamp(self) -> str:
        return f"run_digest={self.digest} seed={self.seed}"

    def _done(self, name: str) -> None:
        self.files[name] = hashlib.sha256((self.root / name).read_bytes()).hexdigest()

    def table(self, name: str, columns: Sequence[str], rows: Sequence[dict]) -> Path:
        buf = io.StringIO()
        buf.write(f"# {self.stamp}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
        path = self.root / name
        path.write_text(buf.getvalue())
        self._done(name)
        return path

    def snapshot(self, name: str, f) -> Path:
        path = self.root / name
        write_snapshot(path, f, self.stamp)
        self._done(name)
        return path

    def reports(self, reports: Sequence[StatReport], name: str = "reports.csv") -> Path:
        path = self.root / name
        write_reports(path, reports, f"{self.digest} seed={self.seed}")
        self._done(name)
        return path


@dataclass
class RunResult:
    verb: str
    output: Path
    reports: List[StatReport]
    manifest: dict

    @property
    def passed(self) -> bool:
        return all_passed(self.reports)


def run_digest(cfg: Config) -> str:
    return hashlib.sha256((cfg.canonical() + f"code_version = {__version__}\n").encode()).hexdigest()


def output_dir(cfg: Config, override: Optional[str] = None) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    return Path(override or env or cfg["run.output"])


def sim_config(cfg: Config, **changes) -> SimConfig:
    kw = dict(N=cfg["sim.N"], m0=cfg["sim.m0"], lam=cfg["sim.lambda"], dt=cfg["sim.dt"], T=cfg["sim.T"],
              scheme=cfg["sim.scheme"], seed=cfg["run.seed"], chains=cfg["sim.chains"], burn_in=cfg["sim.burn_in"],
              lambda0=cfg["sim.lambda0"], blowup_ceiling=cfg["sim.blowup_ceiling"])
    kw.update(changes)
    return SimConfig(**kw)


def gibbs_config(cfg: Config) -> GibbsConfig:
    return GibbsConfig(mala_step=cfg["gibbs.mala_step"], n_steps=cfg["gibbs.n_steps"],
                       thinning=cfg["gibbs.thinning"], beta=cfg["gibbs.beta"], method=cfg["gibbs.method"])


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------

def verb_simulate(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    """Galerkin SDE from a free-field start; observables at recorded steps."""
    sim = sim_config(cfg)
    consts = renorm_constants(sim.N, sim.m0)
    root = NoiseStream(sim.seed, 1)
    K2 = sim.state_cutoff
    X = ou_init_stationary(K2, sim.m0, root.child(0), (sim.chains,)).z
    noise = root.child(1)
    obs = {k: v for k, v in default_observables(sim.N).items() if k in ("l2_norm_sq", "quartic_integral")}
    rows = []

    def record(step: int) -> None:
        for name, o in obs.items():
            rows.append({"observable": name, "t": step * sim.dt, "value": float(np.mean(o(X)))})

    record(0)
    every = max(1, cfg["sim.record_every"])
    for step in range(1, sim.n_steps + 1):
        X = step_sde(X, sim, consts, rng=noise, t=step * sim.dt)
        if step % every == 0 or step == sim.n_steps:
            record(step)
    out.table("samples.csv", ("observable", "t", "value"), rows)
    for i in range(min(sim.chains, 4)):
        out.snapshot(f"final_chain{i}.phi4", X[i])
    return []


def _free_targets(sim: SimConfig) -> Dict[str, float]:
    """Exact free-field expectations of the default observables (lambda = 0)."""
    K2 = sim.state_cutoff
    w = projection_multiplier(2, sim.N, K2)
    out = {"l2_norm_sq": float(np.sum(w * w * stationary_variance(K2, sim.m0)))}
    for k in lowest_modes(10):
        out["mode_%d_%d_%d" % k] = 1.0 / (2.0 * (sum(x * x for x in k) + sim.m0 ** 2))
    return out


def verb_sample_gibbs(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    """Independent draws from the cutoff Gibbs measure.

    Each draw is the final state of its own MALA chain (or one exact
    rejection draw). At lambda = 0 the exact free moments serve as targets.
    """
    sim = sim_config(cfg)
    gibbs = gibbs_config(cfg)
    final_only = replace(gibbs, thinning=max(gibbs.n_steps, 1)) if gibbs.method == "mala" else replace(
        gibbs, n_steps=1, thinning=1)
    consts = renorm_constants(sim.N, sim.m0)
    obs = default_observables(sim.N)
    targets = _free_targets(sim) if sim.lam == 0 else {}
    values: Dict[str, List[float]] = {name: [] for name in obs}
    root = NoiseStream(sim.seed, 2)
    draws, got, round_no = cfg["gibbs.samples"], 0, 0
    while got < draws:
        n = min(max(1, sim.chains), draws - got)
        *_, sample = gibbs_sample(final_only, replace(sim, chains=n), consts, root.child(round_no))
        for name, o in obs.items():
            values[name].extend(float(v) for v in o(sample))
        got += n
        round_no += 1
    rows = [{"observable": name, "value": v, "target": targets.get(name, "")}
            for name, vals in values.items() for v in vals]
    return reports_from_samples(out.table("samples.csv", ("observable", "value", "target"), rows))


def verb_verify_invariance(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    sim = sim_config(cfg)
    rep = invariance_test(sim, gibbs_config(cfg), rng=NoiseStream(sim.seed, 3), dts=cfg["invariance.dts"],
                          reference_dt=cfg["invariance.reference_dt"], checkpoints=cfg["invariance.checkpoints"])
    rows = rep.rows()
    cols = list(rows[0])
    out.table("invariance.csv", cols, rows)
    reports = []
    for name in rep.observables:
        z = rep.z_scores[name]
        m = rep.means[rep.dt][name]
        s = rep.stderr[rep.dt][name]
        reports.append(StatReport(f"drift:{name}", float(m[-1] - m[0]), float(math.hypot(s[0], s[-1])), 0.0,
                                  float(z), rep.z_threshold, "pass" if abs(z) < rep.z_threshold else "fail"))
    l2 = rep.means[rep.dt]["l2_norm_sq"]
    for i, z in enumerate(rep.checkpoint_z):
        reports.append(StatReport(f"checkpoint:l2_norm_sq:t={rep.times[i + 1]:g}", float(l2[i + 1]), math.nan,
                                  float(l2[0]), float(z), 3.0, "pass" if abs(z) < 3.0 else "fail"))
    if rep.residuals and sim.lam > 0:
        ok, names = rep.resolved_shrink()
        reports.append(StatReport.check("residuals_shrink:" + ("+".join(names) or "none_resolved"),
                                        float(len(names)), ok))
    return reports


def verb_trees(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    """Tree evolution with periodic binary snapshots of the first chain."""
    N, m0, seed = cfg["sim.N"], cfg["sim.m0"], cfg["run.seed"]
    dt, T = cfg["trees.dt"], cfg["sim.T"]
    every = cfg["trees.snapshot_every"]
    root = NoiseStream(seed, 4)
    consts = renorm_constants(N, m0)
    ens = ou_init_stationary(2 ** (N + 2) - 1, m0, root.child(0), (cfg["sim.chains"],), N=N, consts=consts)
    burn = cfg["sim.burn_in"] if cfg["sim.burn_in"] is not None else default_burn_in(m0)
    ens = burn_in_trees(ens, dt, root.child(1), burn)
    n_steps = int(round(T / dt))
    rows = []
    noise = root.child(2)

    def dump(i: int) -> None:
        snap = tree_snapshot(ens)
        for name in ("z1", "z2", "z3", "z02", "z03", "z22", "z23"):
            f = getattr(snap, name)
            rows.append({"step": i, "tree": name, "mean_l2_sq": float(np.mean(f.norm_sq()))})
            out.snapshot(f"tree_{name}_step{i:06d}.phi4", f[0])

    for i in range(n_steps + 1):
        if i > 0:
            ens = tree_convolved_step(ens, dt, noise)
        if (every > 0 and i % every == 0) or i == n_steps:
            dump(i)
    out.table("trees.csv", ("step", "tree", "mean_l2_sq"), rows)
    return []


def verb_renorm_constants(cfg: Config, out: ArtifactWriter, Ns: Optional[Sequence[int]] = None) -> List[StatReport]:
    Ns = list(Ns) if Ns else [cfg["sim.N"]]
    m0 = cfg["sim.m0"]
    rows = []
    for N in Ns:
        c = renorm_constants(N, m0)
        rows.append({"N": N, "m0": m0, "C1": c.c1, "C2": c.c2})
    out.table("constants.csv", ("N", "m0", "C1", "C2"), rows)
    return []


def verb_besov(cfg: Config, out: ArtifactWriter, snapshot: Optional[str] = None) -> List[StatReport]:
    path = snapshot or cfg["besov.snapshot"]
    if not path:
        raise ValueError("besov needs a snapshot file (besov.snapshot or a positional argument)")
    f = read_snapshot(path)
    p = parse_exponent(cfg["besov.p"])
    norms = block_norms(f, p)
    rows = [{"j": j - 1, "norm": float(v)} for j, v in enumerate(norms)]
    out.table("besov.csv", ("j", "norm"), rows)
    return []


def verb_commutator_scan(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    scan = commutator_scan(NoiseStream(cfg["run.seed"], 10), alpha=cfg["commutator.alpha"],
                           beta=cfg["commutator.beta"], gamma=cfg["commutator.gamma"],
                           epsilon=cfg["commutator.epsilon"], p=cfg["commutator.p"],
                           K=cfg["commutator.K"], t_min=cfg["commutator.t_min"], t_max=cfg["commutator.t_max"],
                           points=cfg["commutator.points"], realizations=cfg["commutator.realizations"])
    out.table("commutator.csv", ("t", "norm", "predicted_power"), scan.rows())
    tol = cfg["commutator.slope_tolerance"]
    return [StatReport.check("commutator_slope", scan.slope, abs(scan.slope_error) <= tol, scan.predicted_slope)]


DIAG_COLUMNS = ("t", "grad_x_geq_sq", "x2_l2_sq", "p1x2_l4_4", "x_lt_b4_cubed", "x_geq_b43",
                "x_lt_b4_2gamma_cubed", "x_geq_b43_2gamma")
FUNCTIONALS = ("energy_X", "energy_Y", "energy_Y_q", "sup_x_lt", "sup_x_geq")
STABILITY_CHECKED = ("energy_X", "energy_Y_q")


def diagnostics_tables(cfg: Config, progress: Optional[Callable[[str], None]] = None):
    """Per-time integrands, per-seed functionals and the N-sweep summary."""
    ep = EnergyParams(eta=cfg["diagnostics.eta"], gamma=cfg["diagnostics.gamma"],
                      epsilon=cfg["diagnostics.epsilon"], q=cfg["diagnostics.q"])
    m0, lam, T = cfg["sim.m0"], cfg["sim.lambda"], cfg["sim.T"]
    dt, chains = cfg["diagnostics.dt"], cfg["diagnostics.chains"]
    base = cfg["run.seed"]
    per_time, per_seed, sweep = [], [], []
    for N in cfg["diagnostics.Ns"]:
        values: Dict[str, List[float]] = {k: [] for k in FUNCTIONALS}
        for i in range(cfg["diagnostics.seeds"]):
            seed = base + i
            run = diagnostics_run(N, m0, lam, dt, T, seed, chains, ep, cfg["diagnostics.record_every"],
                                  burn_in=cfg["sim.burn_in"])
            for row in run.table:
                per_time.append({"N": N, "seed": seed, **row})
            for name in FUNCTIONALS:
                v = float(np.mean(run.summary[name]))
                values[name].append(v)
                per_seed.append({"N": N, "seed": seed, "functional": name, "value": v})
            if progress:
                progress(f"N={N} seed={seed} energy_X={values['energy_X'][-1]:.4g}")
        for name in FUNCTIONALS:
            v = np.asarray(values[name])
            mean = float(v.mean())
            sd = float(v.std(ddof=1)) if v.size > 1 else math.nan
            spread = sd / abs(mean) if mean else math.inf
            sweep.append({"N": N, "functional": name, "mean": mean, "seed_std": sd, "relative_spread": spread,
                          "seeds": int(v.size)})
    return per_time, per_seed, sweep


def diagnostics_reports(sweep: Sequence[dict], max_spread: float) -> List[StatReport]:
    reports = []
    for row in sweep:
        if row["functional"] in STABILITY_CHECKED:
            ok = bool(np.isfinite(row["mean"]) and row["relative_spread"] < max_spread)
            reports.append(StatReport.check(f"spread:{row['functional']}:N={row['N']}", row["relative_spread"], ok,
                                            max_spread))
    return reports


def verb_diagnostics(cfg: Config, out: ArtifactWriter) -> List[StatReport]:
    per_time, per_seed, sweep = diagnostics_tables(cfg)
    out.table("integrands.csv", ("N", "seed") + DIAG_COLUMNS, per_time)
    out.table("functionals.csv", ("N", "seed", "functional", "value"), per_seed)
    out.table("sweep.csv", ("N", "functional", "mean", "seed_std", "relative_spread", "seeds"), sweep)
    return diagnostics_reports(sweep, cfg["diagnostics.max_spread"])


VERB_FUNCTIONS: Dict[str, Callable] = {
    "simulate": verb_simulate,
    "sample-gibbs": verb_sample_gibbs,
    "verify-invariance": verb_verify_invariance,
    "trees": verb_trees,
    "renorm-constants": verb_renorm_constants,
    "besov": verb_besov,
    "commutator-scan": verb_commutator_scan,
    "diagnostics": verb_diagnostics,
}


def run(cfg: Config, verb: Optional[str] = None, output: Optional[str] = None, **extra) -> RunResult:
    """Execute one verb, write its artifacts, reports.csv and manifest.json."""
    verb = verb or cfg["run.verb"]
    if verb not in VERB_FUNCTIONS:
        raise ValueError(f"unknown verb {verb!r}")
    cfg = cfg.with_overrides({"run.verb": verb})
    digest = run_digest(cfg)
    out = ArtifactWriter(output_dir(cfg, output), digest, cfg["run.seed"])
    started = time.time()
    reports = VERB_FUNCTIONS[verb](cfg, out, **extra)
    out.reports(reports)
    finished = time.time()
    manifest = {
        "verb": verb,
        "config": cfg.canonical(),
        "seed": cfg["run.seed"],
        "code_version": __version__,
        "run_digest": digest,
        "started": started,
        "finished": finished,
        "outputs": dict(sorted(out.files.items())),
        "all_passed": all_passed(reports),
    }
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return RunResult(verb, out.root, reports, manifest)


def report(path: str, threshold: float = 4.0) -> tuple[List[StatReport], str]:
    """Reports of a run directory (its reports.csv, else batch means of samples.csv) or of a samples file."""
    p = Path(path)
    if p.is_dir():
        reports = read_reports(p / "reports.csv") if (p / "reports.csv").exists() else []
        if not reports and (p / "samples.csv").exists():
            reports = reports_from_samples(p / "samples.csv", threshold)
        elif not reports and not (p / "reports.csv").exists():
            raise FileNotFoundError(f"{p}: neither reports.csv nor samples.csv found")
    else:
        reports = reports_from_samples(p, threshold)
    return reports, format_reports(reports) if reports else "(no statistical checks in this run)"
