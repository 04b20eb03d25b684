"""YAML config parsing and deterministic file serialization.

Configs are strict: unknown keys are rejected, every module invariant is
checked at load time, and parse failures carry a line/column when the YAML
parser provides one. Floats serialize with ``repr``, the shortest decimal
that round-trips an IEEE-754 double, so replay hashing is platform-stable.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import ParseError, ValidationError
from .experiment import ExperimentConfig
from .interventions import KINDS, Intervention, InterventionDistribution
from .sem import ConstantNoise, Dataset, GaussianNoise, SemModel, build_sem


def load_yaml(path: str | Path) -> Any:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        return yaml.safe_load(path.read_text())
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"{path}: {exc.problem}{where}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _require_mapping(doc: Any, what: str) -> Mapping[str, Any]:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{what} must be a mapping, got {type(doc).__name__}")
    return doc


def _reject_unknown(doc: Mapping[str, Any], allowed: set[str], what: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"{what}: unknown keys {sorted(unknown)}")


def parse_sem_config(doc: Any) -> tuple[SemModel, tuple[str, ...]]:
    """Validate {variables, target, edges, noise} and build the model."""
    doc = _require_mapping(doc, "SEM config")
    _reject_unknown(doc, {"variables", "target", "edges", "noise"}, "SEM config")
    for key in ("variables", "target", "noise"):
        if key not in doc:
            raise ValidationError(f"SEM config: missing key {key!r}")

    names = [str(v) for v in doc["variables"]]
    if len(set(names)) != len(names):
        raise ParseError("SEM config: duplicate variable names")
    index = {name: i for i, name in enumerate(names)}
    if doc["target"] not in index:
        raise ValidationError(f"SEM config: unknown target {doc['target']!r}")

    edges = []
    for entry in doc.get("edges", []) or []:
        entry = _require_mapping(entry, "edge")
        _reject_unknown(entry, {"from", "to", "weight"}, "edge")
        try:
            src, dst = index[entry["from"]], index[entry["to"]]
        except KeyError as exc:
            raise ValidationError(f"edge references unknown variable {exc.args[0]!r}") from exc
        edges.append((src, dst, float(entry.get("weight", 1.0))))

    noise_doc = _require_mapping(doc["noise"], "noise block")
    unknown = set(noise_doc) - set(names)
    if unknown:
        raise ValidationError(f"noise block: unknown variables {sorted(unknown)}")
    specs: list[Any] = []
    for name in names:
        if name not in noise_doc:
            raise ValidationError(f"noise block: missing entry for {name!r}")
        entry = _require_mapping(noise_doc[name], f"noise for {name!r}")
        if "constant" in entry:
            _reject_unknown(entry, {"constant"}, f"noise for {name!r}")
            specs.append(ConstantNoise(float(entry["constant"])))
        else:
            _reject_unknown(entry, {"variance", "mean"}, f"noise for {name!r}")
            if "variance" not in entry:
                raise ValidationError(f"noise for {name!r} needs 'variance' or 'constant'")
            specs.append(GaussianNoise(float(entry["variance"]), float(entry.get("mean", 0.0))))

    sem = build_sem(edges=edges, noise=tuple(specs), target=index[doc["target"]])
    return sem, tuple(names)


def parse_dist_config(
    doc: Any, names: Sequence[str], target: int
) -> InterventionDistribution:
    """Validate {kind, sites, flip_prob, scale[, components]} against the SEM."""
    doc = _require_mapping(doc, "distribution config")
    _reject_unknown(doc, {"kind", "sites", "flip_prob", "scale", "components"}, "distribution config")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"distribution config: kind must be one of {KINDS}, got {kind!r}")
    index = {name: i for i, name in enumerate(names)}
    sites = []
    for site in doc.get("sites", []) or []:
        if site not in index:
            raise ValidationError(f"distribution config: unknown site {site!r}")
        if index[site] == target:
            raise ValidationError("distribution config: sites must exclude the target")
        sites.append(index[site])
    components = tuple(
        (float(entry["weight"]), parse_dist_config(entry["dist"], names, target))
        for entry in doc.get("components", []) or []
    )
    return InterventionDistribution(
        kind=kind,
        sites=tuple(sites),
        flip_prob=float(doc.get("flip_prob", 0.5)),
        scale=float(doc.get("scale", 1.0)),
        components=components,
    )


def _resolve(doc_or_path: Any, base_dir: Path) -> Any:
    if isinstance(doc_or_path, str):
        return load_yaml(base_dir / doc_or_path)
    return doc_or_path


def parse_experiment_config(
    doc: Any, base_dir: str | Path = "."
) -> tuple[ExperimentConfig, tuple[str, ...]]:
    """Validate the experiment harness config; sem and dists may be inline or paths."""
    base_dir = Path(base_dir)
    doc = _require_mapping(doc, "experiment config")
    allowed = {
        "sem",
        "train_dist",
        "test_dist",
        "m_train_range",
        "m_test",
        "n_samples",
        "rho_threshold",
        "gen_threshold",
        "repeats",
        "master_seed",
    }
    _reject_unknown(doc, allowed, "experiment config")
    for key in ("sem", "train_dist", "test_dist"):
        if key not in doc:
            raise ValidationError(f"experiment config: missing key {key!r}")

    sem, names = parse_sem_config(_resolve(doc["sem"], base_dir))
    train = parse_dist_config(_resolve(doc["train_dist"], base_dir), names, sem.target)
    test = parse_dist_config(_resolve(doc["test_dist"], base_dir), names, sem.target)

    raw_range = doc.get("m_train_range", list(range(3, 21)))
    if isinstance(raw_range, Mapping):
        _reject_unknown(raw_range, {"start", "stop"}, "m_train_range")
        raw_range = list(range(int(raw_range["start"]), int(raw_range["stop"]) + 1))
    config = ExperimentConfig(
        sem=sem,
        train_dist=train,
        test_dist=test,
        m_train_range=tuple(int(m) for m in raw_range),
        m_test=int(doc.get("m_test", 100)),
        n_samples=int(doc.get("n_samples", 30_000)),
        rho_threshold=float(doc.get("rho_threshold", 0.02)),
        gen_threshold=float(doc.get("gen_threshold", 0.02)),
        repeats=int(doc.get("repeats", 5)),
        master_seed=int(doc.get("master_seed", 0)),
    )
    return config, names


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    """Shortest decimal that round-trips the double (at most 17 significant digits)."""
    return repr(float(x))


def dataset_to_csv(dataset: Dataset, names: Sequence[str]) -> str:
    if len(names) != dataset.num_vars:
        raise ValidationError("name count does not match dataset width")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in dataset.samples:
        writer.writerow([format_float(v) for v in row])
    return buf.getvalue()


def dataset_from_csv(
    text: str, target_name: str, intervention_id: str = "", seed: int = 0
) -> tuple[Dataset, tuple[str, ...]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty dataset CSV")
    names = tuple(rows[0])
    if target_name not in names:
        raise ValidationError(f"target {target_name!r} not in CSV header")
    samples = np.array([[float(v) for v in row] for row in rows[1:]])
    ds = Dataset(
        samples=samples,
        target=names.index(target_name),
        intervention_id=intervention_id,
        seed=seed,
    )
    return ds, names


def intervention_to_dict(iv: Intervention, names: Sequence[str]) -> dict:
    return {
        "id": iv.id,
        "hard": {names[i]: v for i, v in sorted(iv.hard.items())},
        "soft": {f"{names[j]}->{names[i]}": w for (j, i), w in sorted(iv.soft.items())},
    }


def dump_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
