"""Run configuration files.

A configuration is a JSON object::

    {
      "demo": "cgl",                      registered demo name
      "problem": {"n": 30, "bc": "neumann"},   builder options (optional)
      "params": {"r": -0.1},              parameter overrides by name (optional)
      "output": "cgl-1d",                 run directory below the output root (optional)
      "stages": [ {...}, ... ]            executed in order
    }

Every stage has a ``"stage"`` kind and most have a ``"dir"`` (the branch
directory written to).  Points are referenced as ``"<dir>/<label>"`` where
the label is ``pt<k>`` for the k-th step or a special point label such as
``hp1``, ``bp2`` or ``fp1`` (numbered per type in the order found).

============  ===============================================================
stage         keys (besides ``stage``)
============  ===============================================================
cont-steady   dir, steps, [from], [direction], [primary], [settings]
hoswibra      dir, from, [ds], [tl], [dlam], [settings]
cont-po       dir, steps, [from], [ds]
twswibra      dir, from, speed, wavenumber, [eps], [direction], [settings]
poswibra      dir, from, [ds], [sw], [first_tol]
hpcont        dir, from, second, steps, [ds], [dsmax], [directions]
bpcont        dir, from, second, steps, [ds], [dsmax], [directions]
floquet       from, [alg], [count]
timeint       from, [periods], [npp], [save_every]
============  ===============================================================

``settings`` holds fields of the steady or periodic-orbit settings.
``cont-steady`` without ``from`` starts at the demo's documented state;
``cont-po`` without ``from`` continues the branch prepared in ``dir`` by a
preceding switching stage or continuation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

STAGE_KEYS = {
    "cont-steady": ({"dir", "steps"}, {"from", "direction", "primary", "settings"}),
    "hoswibra": ({"dir", "from"}, {"ds", "tl", "dlam", "settings"}),
    "cont-po": ({"dir", "steps"}, {"from", "ds"}),
    "twswibra": ({"dir", "from", "speed", "wavenumber"}, {"eps", "direction", "settings"}),
    "poswibra": ({"dir", "from"}, {"ds", "sw", "first_tol"}),
    "hpcont": ({"dir", "from", "second", "steps"}, {"ds", "dsmax", "directions"}),
    "bpcont": ({"dir", "from", "second", "steps"}, {"ds", "dsmax", "directions"}),
    "floquet": ({"from"}, {"alg", "count"}),
    "timeint": ({"from"}, {"periods", "npp", "save_every"}),
}


class ConfigError(ValueError):
    pass


@dataclass
class Stage:
    kind: str
    options: dict

    @property
    def dir(self) -> Optional[str]:
        return self.options.get("dir")

    @property
    def source(self) -> Optional[tuple]:
        ref = self.options.get("from")
        return None if ref is None else split_ref(ref)


@dataclass
class RunConfig:
    demo: str
    problem: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str = "run"
    stages: list = field(default_factory=list)


def split_ref(ref: str) -> tuple:
    parts = str(ref).strip("/").split("/")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"point reference {ref!r} must look like '<dir>/<label>'")
    return parts[0], parts[1]


def parse_config(data: dict) -> RunConfig:
    from ..demos import DEMOS

    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - {"demo", "problem", "params", "output", "stages"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    demo = data.get("demo")
    if demo not in DEMOS:
        raise ConfigError(f"unknown demo {demo!r}; available: {', '.join(sorted(DEMOS))}")
    names = DEMOS[demo].param_names
    params = dict(data.get("params", {}))
    bad = set(params) - set(names)
    if bad:
        raise ConfigError(f"unknown parameters for {demo}: {sorted(bad)}")
    stages = []
    produced = set()
    for k, raw in enumerate(data.get("stages", [])):
        if not isinstance(raw, dict) or "stage" not in raw:
            raise ConfigError(f"stage {k}: needs a 'stage' key")
        kind = raw["stage"]
        if kind not in STAGE_KEYS:
            raise ConfigError(f"stage {k}: unknown kind {kind!r}")
        required, optional = STAGE_KEYS[kind]
        opts = {key: v for key, v in raw.items() if key != "stage"}
        missing = required - set(opts)
        extra = set(opts) - required - optional
        if missing:
            raise ConfigError(f"stage {k} ({kind}): missing {sorted(missing)}")
        if extra:
            raise ConfigError(f"stage {k} ({kind}): unknown keys {sorted(extra)}")
        stage = Stage(kind, opts)
        if stage.source is not None and stage.source[0] not in produced:
            raise ConfigError(f"stage {k} ({kind}): refers to {opts['from']!r} before '{stage.source[0]}' is produced")
        if kind == "cont-po" and stage.source is None and stage.dir not in produced:
            raise ConfigError(f"stage {k} (cont-po): nothing to continue in '{stage.dir}'")
        for key in ("speed", "second", "primary"):
            if key in opts and opts[key] not in names:
                raise ConfigError(f"stage {k} ({kind}): {key} must be a parameter name of {demo}")
        if stage.dir:
            produced.add(stage.dir)
        stages.append(stage)
    return RunConfig(demo=demo, problem=dict(data.get("problem", {})), params=params,
                     output=str(data.get("output", "run")), stages=stages)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data)
