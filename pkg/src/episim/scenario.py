"""Scenario documents: what to simulate, on which environment, with which policies."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .airborne import DEFAULT_K, ClassQuarantine, TestingPolicy, VaccinationEvent
from .environment import ConfigError, Environment, build_tree, builtin_environment_path
from .progression import HospitalPolicy, ProgressionTable, builtin_table, load_table, parse_table
from .vectorborne import VectorControlPolicy, VectorParams

DATA = Path(__file__).parent / "data"

WORK_KIND = {
    "student": "school",
    "teacher": "school",
    "doctor": "hospital",
    "nurse": "hospital",
    "bank_worker": "bank",
    "farmer": "farm",
    "garment_worker": "factory",
    "supermarket_worker": "supermarket",
    "office_worker": "office",
    "homemaker": None,
}

AGE_RANGE = {
    "student": (6, 19),
    "teacher": (24, 60),
    "doctor": (27, 65),
    "nurse": (22, 60),
    "bank_worker": (22, 60),
    "farmer": (20, 75),
    "garment_worker": (18, 50),
    "supermarket_worker": (18, 55),
    "office_worker": (22, 60),
    "homemaker": (22, 80),
}

# relative susceptibility by 10-year band, capped at 1 (illustrative)
DEFAULT_S_AGE = ([0, 10, 20, 30, 40, 50, 60, 70, 80], [0.34, 0.67, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])


@dataclass
class ClassSpec:
    name: str
    count: int
    subclasses: dict[str, float]
    age: tuple[int, int]
    work: str | None


@dataclass
class PopulationSpec:
    classes: list[ClassSpec]
    public_prob: float = 0.4
    taxi_share: float = 0.15
    local_work: float = 0.85

    @property
    def size(self) -> int:
        return sum(c.count for c in self.classes)


@dataclass
class ImmunitySpec:
    k: float = DEFAULT_K
    alpha_vacc: float = 0.8
    alpha_hyg: float = 0.2
    gamma_vacc: float = 0.0
    gamma_hyg: tuple[float, float] = (0.0, 0.5)
    s_age_bands: list[float] = field(default_factory=lambda: list(DEFAULT_S_AGE[0]))
    s_age_values: list[float] = field(default_factory=lambda: list(DEFAULT_S_AGE[1]))


@dataclass
class SeedingSpec:
    infectious: int = 0
    infectious_class: str | None = None
    exposed_homes: int = 0
    per_home: int = 5
    home_zone: str | None = None
    hotspot_patches: int = 9
    hotspot_I_v: tuple[int, int] = (0, 20)


@dataclass
class Scenario:
    name: str
    seed: int
    days: int
    disease: str
    pathway: str  # airborne | vector
    environment: Environment
    progression: ProgressionTable
    population: PopulationSpec
    immunity: ImmunitySpec
    seeding: SeedingSpec
    hospital: HospitalPolicy
    matrices: str = "builtin"
    testing: TestingPolicy | None = None
    class_quarantines: list[ClassQuarantine] = field(default_factory=list)
    vaccinations: list[VaccinationEvent] = field(default_factory=list)
    vector: VectorParams = field(default_factory=VectorParams)
    vector_control: VectorControlPolicy | None = None
    temperature_C: float | None = None
    holidays: tuple[int, ...] = ()
    trials: str = "per_minute"  # per_minute | per_pair_day
    contact_events: bool = True


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_document(path: str | Path, _seen=()) -> dict:
    """Load a scenario document, resolving ``extends`` chains (relative paths)."""
    path = Path(path)
    if path in _seen:
        raise ConfigError(f"{path}: circular extends")
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping")
    parent = doc.pop("extends", None)
    if parent:
        base = read_document(path.parent / parent, _seen + (path,))
        doc = _merge(base, doc)
    doc.setdefault("_dir", str(path.parent))
    return doc


def _resolve(ref: str, base_dir: str) -> Path:
    p = Path(ref)
    return p if p.is_absolute() else Path(base_dir) / p


def _opt_tuple(v):
    return None if v is None else tuple(v)


def parse_scenario(doc: dict[str, Any]) -> Scenario:
    base_dir = doc.get("_dir", ".")
    known = {"_dir", "name", "seed", "days", "disease", "pathway", "environment", "progression",
             "matrices", "population", "immunity", "seeding", "hospital", "testing",
             "class_quarantine", "vaccination", "vector", "vector_control", "temperature_C",
             "holidays", "trials", "contact_events"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"scenario: unknown keys {sorted(unknown)}")
    disease = str(doc.get("disease", "covid"))
    pathway = doc.get("pathway") or ("vector" if disease == "dengue" else "airborne")
    if pathway not in ("airborne", "vector"):
        raise ConfigError(f"pathway: unknown pathway {pathway!r}")

    env_ref = doc.get("environment", "builtin")
    env_path = builtin_environment_path() if env_ref == "builtin" else _resolve(env_ref, base_dir)
    try:
        with open(env_path) as fh:
            env_doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"environment: {env_path}: {exc.strerror}") from None
    env = build_tree(env_doc)

    prog_ref = doc.get("progression", "builtin")
    if isinstance(prog_ref, dict):
        table = parse_table(prog_ref)
    elif prog_ref == "builtin":
        table = builtin_table(disease)
    else:
        table = load_table(_resolve(prog_ref, base_dir))

    pdoc = doc.get("population") or {}
    classes = []
    for name, c in (pdoc.get("classes") or {}).items():
        where = f"population.classes.{name}"
        if name not in WORK_KIND and "work" not in (c or {}):
            raise ConfigError(f"{where}: unknown class; give its work location kind")
        c = c or {}
        count = int(c.get("count", 0))
        if count < 0:
            raise ConfigError(f"{where}.count: must be non-negative")
        subs = {str(k): float(v) for k, v in (c.get("subclasses") or {"regular": 1.0}).items()}
        if any(v < 0 for v in subs.values()) or sum(subs.values()) <= 0:
            raise ConfigError(f"{where}.subclasses: weights must be non-negative and not all zero")
        age = tuple(int(a) for a in c.get("age", AGE_RANGE.get(name, (20, 60))))
        work = c.get("work", WORK_KIND.get(name))
        if work is not None and not len(env.places_of_kind(work)):
            raise ConfigError(f"{where}.work: environment has no {work!r} locations")
        classes.append(ClassSpec(name, count, subs, age, work))
    pop = PopulationSpec(classes, float(pdoc.get("public_prob", 0.4)),
                         float(pdoc.get("taxi_share", 0.15)), float(pdoc.get("local_work", 0.85)))
    if pop.size < 1:
        raise ConfigError("population: needs at least one agent")
    if not len(env.places_of_kind("home")):
        raise ConfigError("environment: no home locations")

    idoc = doc.get("immunity") or {}
    imm = ImmunitySpec(
        k=float(idoc.get("k", DEFAULT_K)),
        alpha_vacc=float(idoc.get("alpha_vacc", 0.8)),
        alpha_hyg=float(idoc.get("alpha_hyg", 0.2)),
        gamma_vacc=float(idoc.get("gamma_vacc", 0.0)),
        gamma_hyg=tuple(float(x) for x in idoc.get("gamma_hyg", (0.0, 0.5))),
    )
    if "S_age" in idoc:
        imm.s_age_bands = [float(x) for x in idoc["S_age"]["bands"]]
        imm.s_age_values = [float(x) for x in idoc["S_age"]["values"]]
    if len(imm.s_age_bands) != len(imm.s_age_values):
        raise ConfigError("immunity.S_age: bands and values differ in length")
    if any(not 0 <= v <= 1 for v in imm.s_age_values):
        raise ConfigError("immunity.S_age: values must lie in [0, 1]")
    # gamma values can reach 1 through vaccination, so bound the weights themselves
    if imm.alpha_vacc + imm.alpha_hyg * max(imm.gamma_hyg) > 1.0 + 1e-12:
        raise ConfigError("immunity: alpha_vacc + alpha_hyg * max(gamma_hyg) must not exceed 1")
    if imm.k <= 0:
        raise ConfigError("immunity.k: must be positive")

    sdoc = doc.get("seeding") or {}
    seeding = SeedingSpec(
        infectious=int(sdoc.get("infectious", 0)),
        infectious_class=sdoc.get("infectious_class"),
        exposed_homes=int(sdoc.get("exposed_homes", 0)),
        per_home=int(sdoc.get("per_home", 5)),
        home_zone=sdoc.get("home_zone"),
        hotspot_patches=int(sdoc.get("hotspot_patches", 9)),
        hotspot_I_v=tuple(int(x) for x in sdoc.get("hotspot_I_v", (0, 20))),
    )
    names = {c.name for c in classes}
    if seeding.infectious_class and seeding.infectious_class not in names:
        raise ConfigError(f"seeding.infectious_class: unknown class {seeding.infectious_class!r}")
    if seeding.home_zone and seeding.home_zone not in env.by_name:
        raise ConfigError(f"seeding.home_zone: unknown zone {seeding.home_zone!r}")

    hospital = HospitalPolicy(**(doc.get("hospital") or {}))
    testing = TestingPolicy(**doc["testing"]) if doc.get("testing") else None

    zones = {env.nodes[z].name for z in env.zones}
    quarantines = []
    for i, q in enumerate(doc.get("class_quarantine") or []):
        q = dict(q)
        q["classes"] = tuple(q.get("classes") or ())
        bad = set(q["classes"]) - names
        if bad:
            raise ConfigError(f"class_quarantine[{i}].classes: unknown {sorted(bad)}")
        quarantines.append(ClassQuarantine(**q))
    vaccinations = []
    for i, v in enumerate(doc.get("vaccination") or []):
        v = dict(v)
        v["classes"], v["zones"] = _opt_tuple(v.get("classes")), _opt_tuple(v.get("zones"))
        if v["classes"] and set(v["classes"]) - names:
            raise ConfigError(f"vaccination[{i}].classes: unknown {sorted(set(v['classes']) - names)}")
        if v["zones"] and set(v["zones"]) - zones:
            raise ConfigError(f"vaccination[{i}].zones: unknown {sorted(set(v['zones']) - zones)}")
        vaccinations.append(VaccinationEvent(**v))

    vdoc = dict(doc.get("vector") or {})
    if "K_v" in vdoc:
        vdoc["K_v"] = tuple(vdoc["K_v"])
    vector = VectorParams(**vdoc)
    vc = VectorControlPolicy(**doc["vector_control"]) if doc.get("vector_control") else None

    trials = doc.get("trials", "per_minute")
    if trials not in ("per_minute", "per_pair_day"):
        raise ConfigError(f"trials: unknown mode {trials!r}")
    days = int(doc.get("days", 50))
    if days < 1:
        raise ConfigError("days: must be >= 1")
    matrices = doc.get("matrices", "builtin")
    if matrices != "builtin":
        matrices = str(_resolve(matrices, base_dir))

    return Scenario(
        name=str(doc.get("name", "scenario")), seed=int(doc.get("seed", 0)), days=days,
        disease=disease, pathway=pathway, environment=env, progression=table,
        population=pop, immunity=imm, seeding=seeding, hospital=hospital, matrices=matrices,
        testing=testing, class_quarantines=quarantines, vaccinations=vaccinations,
        vector=vector, vector_control=vc,
        temperature_C=None if doc.get("temperature_C") is None else float(doc["temperature_C"]),
        holidays=tuple(int(d) for d in doc.get("holidays") or ()), trials=trials,
        contact_events=bool(doc.get("contact_events", True)),
    )


def load_scenario(path: str | Path, overrides: dict | None = None) -> Scenario:
    doc = read_document(path)
    if overrides:
        doc = _merge(doc, overrides)
    try:
        return parse_scenario(doc)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def builtin_scenario(name: str) -> Path:
    path = DATA / "scenarios" / f"{name}.yaml"
    if not path.exists():
        raise ConfigError(f"no built-in scenario {name!r}")
    return path


def builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in (DATA / "scenarios").glob("*.yaml") if not p.stem.startswith("_"))
