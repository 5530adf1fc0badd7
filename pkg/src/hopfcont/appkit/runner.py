"""Execution of a run configuration.

Each stage writes rows to ``<run>/<dir>/branch.csv`` and one point file
per record (``pt<k>`` plus a type label such as ``hp1`` for special
points).  ``<run>/points.csv`` indexes every point file and
``<run>/run.log`` records the stages and any failure.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import branching, floquet, hopf, specialpoints, steady, timeint
from ..demos import get_demo
from .branchio import BranchWriter
from .config import RunConfig, Stage
from .plots import multiplier_plot
from .snapshot import Snapshot, load_point, save_point

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "HOPFCONT_OUTPUT_ROOT"
EVENT_TYPES = ("HP", "BP", "PD", "NS")
INDEX_COLUMNS = ["dir", "label", "kind", "step", "ptype", "lam"]


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


class StageError(RuntimeError):
    pass


@dataclass
class RunState:
    config: RunConfig
    root: Path
    problem: object = None
    live: dict = field(default_factory=dict)
    written: dict = field(default_factory=dict)
    type_counts: dict = field(default_factory=dict)
    log_lines: list = field(default_factory=list)

    def note(self, line: str):
        self.log_lines.append(line)
        with (self.root / "run.log").open("a") as fh:
            fh.write(line + "\n")


@dataclass
class RunResult:
    status: int
    root: Path
    log: list


def _complex_shift(v, problem, u):
    if isinstance(v, str) and v == "initeig":
        return 1j * steady.initeig(problem, u)
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def steady_settings(opts: dict, problem=None, u=None) -> steady.SteadySettings:
    opts = dict(opts or {})
    if "shifts" in opts:
        opts["shifts"] = tuple(_complex_shift(v, problem, u) for v in opts["shifts"])
    for key in ("usrlam", "lam_range"):
        if key in opts:
            opts[key] = tuple(opts[key])
    return steady.SteadySettings(**opts)


def hopf_settings(opts: dict) -> hopf.HopfSettings:
    opts = dict(opts or {})
    if "lam_range" in opts:
        opts["lam_range"] = tuple(opts["lam_range"])
    return hopf.HopfSettings(**opts)


def _label_for(state: RunState, dirname: str, point) -> list:
    labels = []
    if point.ptype not in EVENT_TYPES:
        labels.append(f"pt{point.step}")
    if point.ptype not in ("regular", "user"):
        key = (dirname, point.ptype)
        state.type_counts[key] = state.type_counts.get(key, 0) + 1
        labels.append(f"{point.ptype.lower()}{state.type_counts[key]}")
    return labels


def _index(state: RunState, dirname, label, kind, point):
    with (state.root / "points.csv").open("a", newline="") as fh:
        csv.writer(fh).writerow([dirname, label, kind, point.step, point.ptype, repr(float(point.lam))])


def _flush_steady(state: RunState, dirname: str, branch: steady.Branch):
    done = state.written.get(dirname, 0)
    new = branch.points[done:]
    BranchWriter(state.root / dirname, branch.problem.param_names).write(new)
    for pt in new:
        for label in _label_for(state, dirname, pt):
            save_point(state.root / dirname / label, pt, branch.problem, branch.settings)
            _index(state, dirname, label, "steady", pt)
    state.written[dirname] = len(branch.points)
    return len(new)


def _flush_po(state: RunState, dirname: str, branch: hopf.HopfBranch):
    done = state.written.get(dirname, 0)
    new = branch.points[done:]
    BranchWriter(state.root / dirname, branch.problem.param_names).write(new)
    for pt in new:
        orbit = hopf.orbit_from_point(branch, pt)
        for label in _label_for(state, dirname, pt):
            save_point(state.root / dirname / label, orbit, record=pt)
            _index(state, dirname, label, "orbit", pt)
    state.written[dirname] = len(branch.points)
    return len(new)


def _flush(state: RunState, dirname: str, branch):
    if isinstance(branch, hopf.HopfBranch):
        return _flush_po(state, dirname, branch)
    return _flush_steady(state, dirname, branch)


def _source(state: RunState, stage: Stage) -> Snapshot:
    d, label = stage.source
    path = state.root / d / label
    if not path.exists():
        raise StageError(f"point {d}/{label} does not exist")
    return load_point(path)


def _require(snap: Snapshot, kind: str, ref: str):
    if snap.kind != kind:
        raise StageError(f"{ref} is a {snap.kind} point, this stage needs a {kind} point")


# --- stages -----------------------------------------------------------------

def _cont_steady(state: RunState, st: Stage):
    o = st.options
    d = st.dir
    if "from" in o:
        snap = _source(state, st)
        _require(snap, "steady", o["from"])
        prob = snap.problem
        if "primary" in o:
            prob = replace(prob, ilam=prob.pindex(o["primary"]))
        settings = steady_settings(o.get("settings"), prob, snap.point.u) if "settings" in o else snap.settings
        same = st.source[0] == d and snap.point.tangent is not None and "primary" not in o
        if same:
            branch = steady.resume_branch(prob, snap.point, settings)
            state.written[d] = len(branch.points)
        else:
            branch = steady.init_branch(prob, snap.point.u, settings, direction=o.get("direction", 1.0),
                                        par=snap.point.par)
        if "translation_speed" in prob.data:
            branch.on_step = branching.follow_reference
    elif d in state.live and isinstance(state.live[d], steady.Branch):
        branch = state.live[d]
        if "settings" in o:
            branch.settings = steady_settings(o["settings"], branch.problem, branch.u)
    else:
        prob = state.problem
        if "primary" in o:
            prob = replace(prob, ilam=prob.pindex(o["primary"]))
        u0 = get_demo(state.config.demo).start(prob)
        settings = steady_settings(o.get("settings"), prob, u0)
        branch = steady.init_branch(prob, u0, settings, direction=o.get("direction", 1.0))
    steady.cont_steady(branch, int(o["steps"]))
    state.live[d] = branch
    n = _flush(state, d, branch)
    return f"{n} points, lam={branch.points[-1].lam:.6g}" + (f"; stopped: {branch.stop_reason}"
                                                            if branch.stop_reason else "")


def _hoswibra(state: RunState, st: Stage):
    o = st.options
    snap = _source(state, st)
    _require(snap, "steady", o["from"])
    hs = hopf_settings(o.get("settings"))
    orbit = branching.hoswibra(snap.problem, snap.point, o.get("ds", hs.ds), tl=o.get("tl", 30),
                               dlam=o.get("dlam"), settings=hs)
    state.live[st.dir] = hopf.init_po_branch(orbit, o.get("ds", hs.ds))
    state.written[st.dir] = 0
    return f"predictor with T={orbit.T:.6g}"


def _cont_po(state: RunState, st: Stage):
    o = st.options
    d = st.dir
    if "from" in o:
        snap = _source(state, st)
        _require(snap, "orbit", o["from"])
        rec = snap.record
        if st.source[0] == d and snap.point.tx is not None:
            ds = o.get("ds", rec.next_ds if rec is not None and rec.next_ds else snap.settings.ds)
            branch = hopf.resume_po_branch(snap.point, rec.step if rec else 0, ds)
            state.written[d] = len(branch.points)
        else:
            orbit = replace(snap.point, tx=None, tp=None, base=None)
            branch = hopf.init_po_branch(orbit, o.get("ds", snap.settings.ds))
            state.written[d] = 0
    else:
        branch = state.live.get(d)
        if not isinstance(branch, hopf.HopfBranch):
            raise StageError(f"no periodic-orbit branch prepared in '{d}'")
    hopf.cont_po(branch, int(o["steps"]))
    state.live[d] = branch
    n = _flush(state, d, branch)
    if not branch.points:
        raise StageError(f"no orbit converged: {branch.stop_reason}")
    return f"{n} points, lam={branch.points[-1].lam:.6g}" + (f"; stopped: {branch.stop_reason}"
                                                            if branch.stop_reason else "")


def _twswibra(state: RunState, st: Stage):
    o = st.options
    snap = _source(state, st)
    _require(snap, "steady", o["from"])
    prob = snap.problem
    settings = steady_settings(o["settings"], prob, snap.point.u) if "settings" in o else snap.settings
    branch = branching.twswibra(prob, snap.point, prob.pindex(o["speed"]), float(o["wavenumber"]),
                                eps=o.get("eps", 0.1), settings=settings, direction=o.get("direction", 1.0))
    state.live[st.dir] = branch
    state.written[st.dir] = 0
    _flush(state, st.dir, branch)
    return f"travelling wave with speed {branch.par[prob.pindex(o['speed'])]:.6g}"


def _poswibra(state: RunState, st: Stage):
    o = st.options
    snap = _source(state, st)
    _require(snap, "orbit", o["from"])
    rec = snap.record
    crit = None
    if rec is not None and rec.crit_multiplier is not None and rec.crit_vector is not None:
        crit = (rec.crit_multiplier, rec.crit_vector)
    pred = branching.poswibra(snap.point, o.get("ds", 0.1), sw=o.get("sw", "auto"),
                              first_tol=o.get("first_tol", 0.5), crit=crit)
    state.live[st.dir] = hopf.init_po_branch(pred)
    state.written[st.dir] = 0
    return f"predictor off {o['from']}"


def _curve(state: RunState, st: Stage, kind: str):
    o = st.options
    snap = _source(state, st)
    _require(snap, "steady", o["from"])
    prob = snap.problem
    windex = prob.pindex(o["second"])
    if kind == "hpcont":
        cs = specialpoints.hploc(specialpoints.hpcontini(prob, snap.point, windex))
        run, extra = specialpoints.hpcont, "omega"
    else:
        cs = specialpoints.bploc(specialpoints.bpcontini(prob, snap.point, windex))
        run, extra = specialpoints.bpcont, "mu"
    path = state.root / st.dir / "curve.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    lam_name = prob.param_names[prob.ilam]
    rows = 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["direction", "step", lam_name, o["second"], extra])
        for direction in o.get("directions", [1, -1]):
            curve = run(cs, int(o["steps"]), ds=o.get("ds", 0.02), dsmax=o.get("dsmax", 0.05),
                        direction=float(direction))
            for pt in curve.points:
                w.writerow([int(direction), pt.step, repr(float(pt.lam)), repr(float(pt.w)), repr(float(pt.extra))])
                rows += 1
    return f"{rows} curve points"


def _floquet(state: RunState, st: Stage):
    o = st.options
    snap = _source(state, st)
    _require(snap, "orbit", o["from"])
    alg = {"fa1": 1, "fa2": 2}[str(o.get("alg", "fa1")).lower()]
    fr = floquet.floquet(snap.point, alg=alg, nfloq=int(o.get("count", 20)))
    d, label = st.source
    multiplier_plot(fr.multipliers, state.root / d / f"{label}_floquet_fa{alg}")
    return f"ind={fr.ind}, err={fr.err:.3e}"


def _timeint(state: RunState, st: Stage):
    o = st.options
    snap = _source(state, st)
    _require(snap, "orbit", o["from"])
    ts = timeint.hotintxs(snap.problem, snap.point, npp=o.get("npp"), nperiods=o.get("periods", 4),
                          save_every=o.get("save_every", 0))
    d, label = st.source
    path = state.root / d / f"{label}_tint.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "error"])
        for t, e in zip(ts.times, ts.errors):
            w.writerow([repr(float(t)), repr(float(e))])
    if not ts.completed:
        raise StageError(ts.message)
    return f"final error {ts.errors[-1]:.3e}"


STAGES = {
    "cont-steady": _cont_steady,
    "hoswibra": _hoswibra,
    "cont-po": _cont_po,
    "twswibra": _twswibra,
    "poswibra": _poswibra,
    "hpcont": lambda s, st: _curve(s, st, "hpcont"),
    "bpcont": lambda s, st: _curve(s, st, "bpcont"),
    "floquet": _floquet,
    "timeint": _timeint,
}


def run_config(config: RunConfig, root: Path | None = None) -> RunResult:
    """Execute all stages; stops at the first failure and returns a nonzero status."""
    root = (output_root() if root is None else Path(root)) / config.output
    root.mkdir(parents=True, exist_ok=True)
    (root / "run.log").write_text("")
    with (root / "points.csv").open("w", newline="") as fh:
        csv.writer(fh).writerow(INDEX_COLUMNS)
    state = RunState(config, root)
    demo = get_demo(config.demo)
    try:
        state.problem = demo.build(**config.problem).with_params(**config.params)
    except Exception as exc:
        state.note(f"setup FAILED: {exc}")
        return RunResult(1, root, state.log_lines)
    state.note(f"demo {config.demo} with {len(config.stages)} stages")
    for k, st in enumerate(config.stages):
        where = f"stage {k} {st.kind}" + (f" -> {st.dir}" if st.dir else "")
        try:
            msg = STAGES[st.kind](state, st)
        except Exception as exc:
            log.exception("%s failed", where)
            state.note(f"{where}: FAILED: {type(exc).__name__}: {exc}")
            return RunResult(2, root, state.log_lines)
        state.note(f"{where}: {msg}")
    state.note("done")
    return RunResult(0, root, state.log_lines)
