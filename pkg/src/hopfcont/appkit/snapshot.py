"""Binary point files.

Layout (all integers and floats little-endian)::

    4 bytes   magic  b"HCPT"
    uint32    byte-order mark 0x0A0B0C0D
    uint16    format version
    uint32    header length L
    L bytes   UTF-8 JSON header (sorted keys)
    payload   float64 arrays in the order of header["arrays"]

Complex arrays are stored as interleaved real and imaginary parts.  The
header holds the recipe of the problem (demo name, builder options,
parameters, primary parameter, constraint variant), the numerical settings
and every scalar field of the point, so a point can be loaded and a
continuation resumed in a fresh process.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..hopf import HopfOrbit, HopfPoint, HopfSettings
from ..problem import Problem
from ..steady import BranchPoint, SteadySettings

MAGIC = b"HCPT"
BOM = 0x0A0B0C0D
VERSION = 1
_PREFIX = struct.Struct("<4sIHI")


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    """A loaded point together with what is needed to continue from it."""

    problem: Problem
    point: Union[BranchPoint, HopfOrbit]
    settings: Union[SteadySettings, HopfSettings]
    record: Optional[HopfPoint] = None
    header: Optional[dict] = None

    @property
    def kind(self) -> str:
        return "orbit" if isinstance(self.point, HopfOrbit) else "steady"


# --- encoding helpers -----------------------------------------------------

def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return {"complex": [v.real, v.imag]}
    if isinstance(v, tuple):
        return {"tuple": [_jsonable(x) for x in v]}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _from_json(v):
    if isinstance(v, dict):
        if set(v) == {"complex"}:
            return complex(*v["complex"])
        if set(v) == {"tuple"}:
            return tuple(_from_json(x) for x in v["tuple"])
        return {k: _from_json(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_from_json(x) for x in v]
    return v


class _Payload:
    def __init__(self):
        self.specs: list = []
        self.chunks: list = []

    def add(self, name: str, arr):
        if arr is None:
            return
        a = np.asarray(arr)
        is_complex = np.iscomplexobj(a)
        flat = np.ascontiguousarray(a, dtype=complex if is_complex else float).ravel()
        data = flat.view(np.float64) if is_complex else flat
        self.specs.append({"name": name, "shape": list(a.shape), "complex": bool(is_complex)})
        self.chunks.append(data.astype("<f8").tobytes())


def _problem_recipe(prob: Problem) -> dict:
    recipe = prob.data.get("recipe")
    if recipe is None:
        raise SnapshotError(f"problem {prob.name!r} was not built from the demo registry; cannot record it")
    out = dict(demo=recipe["demo"], options=_jsonable(recipe["options"]), ilam=prob.ilam,
               aux=list(prob.aux), hopf_aux=list(prob.hopf_aux), nu=prob.nu, npar=int(prob.params.size),
               bc=prob.mesh.bc_label())
    if "translation_speed" in prob.data:
        out["variant"] = {"translation_speed": int(prob.data["translation_speed"])}
    elif prob.data.get("ks_translation"):
        out["variant"] = {"ks_translation": True}
    return out


def _settings_dict(s) -> dict:
    return _jsonable(asdict(s))


_STEADY_ARRAYS = ("u", "par", "crit_vector", "eigenvalues")
_RECORD_ARRAYS = ("multipliers", "crit_vector")


def _encode(prob: Problem, point, settings, record: Optional[HopfPoint]) -> bytes:
    pay = _Payload()
    pay.add("mesh", prob.mesh.points)
    pay.add("problem_params", prob.params)
    if "u_ref" in prob.data:
        pay.add("u_ref", prob.data["u_ref"])
    header = dict(recipe=_problem_recipe(prob), settings=_settings_dict(settings))
    if isinstance(point, HopfOrbit):
        header["kind"] = "orbit"
        header["orbit"] = dict(T=point.T, converged=point.converged, ptype=point.ptype, label=point.label,
                               m=point.m, lam=point.lam)
        pay.add("t", point.t)
        pay.add("y", point.Y)
        pay.add("par", point.par)
        pay.add("y0d", point.y0d)
        pay.add("tx", point.tx)
        pay.add("tp", point.tp)
        if point.base is not None:
            pay.add("base_x", point.base[0])
            pay.add("base_p", point.base[1])
        if record is not None:
            scal = {f.name: getattr(record, f.name) for f in fields(record)
                    if f.name not in ("par", "Y", "t", "tangent") + _RECORD_ARRAYS}
            header["record"] = _jsonable(scal)
            for name in _RECORD_ARRAYS:
                pay.add("record_" + name, getattr(record, name))
    else:
        header["kind"] = "steady"
        scal = {f.name: getattr(point, f.name) for f in fields(point)
                if f.name not in _STEADY_ARRAYS + ("tangent",)}
        header["point"] = _jsonable(scal)
        pay.add("t", np.zeros(1))
        pay.add("y", point.u)
        for name in _STEADY_ARRAYS[1:]:
            pay.add(name, getattr(point, name))
        if point.tangent is not None:
            pay.add("tx", point.tangent[0])
            pay.add("tp", point.tangent[1])
    header["arrays"] = pay.specs
    text = json.dumps(header, sort_keys=True, allow_nan=True).encode("utf-8")
    return _PREFIX.pack(MAGIC, BOM, VERSION, len(text)) + text + b"".join(pay.chunks)


def save_point(path, point, problem: Optional[Problem] = None, settings=None,
               record: Optional[HopfPoint] = None) -> Path:
    """Write a steady point (``problem`` required) or an orbit to ``path``."""
    path = Path(path)
    if isinstance(point, HopfOrbit):
        problem = point.problem
        settings = point.settings if settings is None else settings
    elif problem is None:
        raise ValueError("saving a steady point needs its problem")
    settings = SteadySettings() if settings is None else settings
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_encode(problem, point, settings, record))
    return path


# --- decoding --------------------------------------------------------------

def read_raw(path) -> tuple[dict, dict]:
    """Header and arrays of a point file, without rebuilding the problem."""
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise SnapshotError(f"{path}: file too short for a point header")
    magic, bom, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: not a point file (bad magic {magic!r})")
    if bom != BOM:
        if bom == int.from_bytes(BOM.to_bytes(4, "little"), "big"):
            raise SnapshotError(f"{path}: byte order mismatch; file was written big-endian")
        raise SnapshotError(f"{path}: corrupt byte-order mark {bom:#x}")
    if version != VERSION:
        raise SnapshotError(f"{path}: format version {version}, this reader understands {VERSION}")
    start = _PREFIX.size
    header = json.loads(raw[start:start + hlen].decode("utf-8"))
    offset = start + hlen
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) * (2 if spec["complex"] else 1)
        nbytes = 8 * count
        if offset + nbytes > len(raw):
            raise SnapshotError(f"{path}: payload shorter than declared sizes")
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).astype(float)
        if spec["complex"]:
            data = data.view(complex)
        arrays[spec["name"]] = data.reshape(shape)
        offset += nbytes
    if offset != len(raw):
        raise SnapshotError(f"{path}: {len(raw) - offset} trailing bytes after the payload")
    return header, arrays


def rebuild_problem(header: dict, arrays: dict) -> Problem:
    from ..branching import translation_constraint
    from ..demos import build_problem
    from ..demos import ks

    rec = header["recipe"]
    prob = build_problem(rec["demo"], **_from_json(rec["options"]))
    prob = replace(prob, params=arrays["problem_params"].copy(), ilam=rec["ilam"])
    variant = rec.get("variant", {})
    if "translation_speed" in variant:
        prob = translation_constraint(prob, arrays["u_ref"], variant["translation_speed"])
    elif variant.get("ks_translation"):
        prob = ks.with_translation(prob, arrays["u_ref"])
    if prob.nu != rec["nu"] or list(prob.aux) != rec["aux"] or list(prob.hopf_aux) != rec["hopf_aux"]:
        raise SnapshotError("rebuilt problem does not match the stored sizes or constraints")
    if not np.array_equal(prob.mesh.points, arrays["mesh"]):
        raise SnapshotError("rebuilt mesh differs from the stored mesh")
    return prob


def load_point(path) -> Snapshot:
    header, arrays = read_raw(path)
    prob = rebuild_problem(header, arrays)
    sdict = _from_json(header["settings"])
    if header["kind"] == "orbit":
        settings = HopfSettings(**sdict)
        o = header["orbit"]
        base = None
        if "base_x" in arrays:
            base = (arrays["base_x"], arrays["base_p"])
        orbit = HopfOrbit(prob, arrays["y"], arrays["t"], o["T"], arrays["par"], settings=settings,
                          y0d=arrays.get("y0d"), tx=arrays.get("tx"), tp=arrays.get("tp"), base=base,
                          converged=o["converged"], ptype=o["ptype"], label=o["label"])
        record = None
        if "record" in header:
            scal = _from_json(header["record"])
            record = HopfPoint(**scal, par=orbit.par.copy(), Y=orbit.Y.copy(), t=orbit.t.copy(),
                               tangent=None if orbit.tx is None else (orbit.tx, orbit.tp),
                               multipliers=arrays.get("record_multipliers"),
                               crit_vector=arrays.get("record_crit_vector"))
        return Snapshot(prob, orbit, settings, record, header)
    settings = SteadySettings(**sdict)
    scal = _from_json(header["point"])
    tangent = (arrays["tx"], arrays["tp"]) if "tx" in arrays else None
    point = BranchPoint(**scal, u=arrays["y"], par=arrays["par"], tangent=tangent,
                        crit_vector=arrays.get("crit_vector"), eigenvalues=arrays.get("eigenvalues"))
    return Snapshot(prob, point, settings, None, header)
