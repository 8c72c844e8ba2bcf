# tfc/services/instance_files.py
"""
File formats.

Canonical instance file (line oriented, `#` starts a comment)::

    # tfc-instance v1
    [params]
    alpha 10.0            (or: lambda 3.5)
    [tasks]
    p1 5                  (task id, capacity)
    [nodes]
    s1
    [edges]
    s1 s2 1.0             (u, v, weight)
    [preferences]
    s1 p1 0.5             (node, task, c)

Education directory: rankings.csv (node,task,rank), friends.csv (u,v) and
capacities.csv (task,capacity), each starting with a `# schema` line.

Every writer goes through `atomic_write_text`. Writers accept a config echo,
stored as a `# config {json}` comment right after the schema line and read
back with `read_config_echo`; readers skip it like any other comment.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from tfc.constants import (
    ASSIGNMENT_SCHEMA,
    CAPACITIES_SCHEMA,
    EDUCATION_ALPHA,
    FRIENDS_SCHEMA,
    GROUPS_SCHEMA,
    INSTANCE_SCHEMA,
    RANKINGS_SCHEMA,
)
from tfc.exceptions import InfeasibleSolutionError, InstanceError, SchemaError
from tfc.services.generators import PreferenceFunction, RankingData, education_instance
from tfc.services.model import Assignment, Instance, feasible
from tfc.services.schemas import SolveReport

logger = logging.getLogger(__name__)

SECTIONS = ("params", "tasks", "nodes", "edges", "preferences")
RANKINGS_FILE = "rankings.csv"
FRIENDS_FILE = "friends.csv"
CAPACITIES_FILE = "capacities.csv"
CONFIG_PREFIX = "config "

ConfigEcho = Mapping[str, Any]


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write to a temp file next to `path`, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def config_comment(echo: ConfigEcho) -> str:
    """Body of the `# config ...` provenance line; keys are sorted so reruns write identical bytes."""
    return CONFIG_PREFIX + json.dumps(dict(echo), sort_keys=True, default=str)


def _header(schema: str, echo: ConfigEcho | None) -> list[str]:
    return [schema] if echo is None else [schema, config_comment(echo)]


def read_config_echo(path: str | Path) -> dict[str, Any] | None:
    """Config echo of a file written here (an education directory reads rankings.csv); None when absent."""
    path = Path(path)
    if path.is_dir():
        path = path / RANKINGS_FILE
    if not path.exists():
        raise SchemaError(f"File not found: {path}")
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if body.startswith(CONFIG_PREFIX):
            try:
                return json.loads(body[len(CONFIG_PREFIX):])
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: malformed config echo: {exc}") from exc
    return None


def _num(value: float) -> str:
    return repr(float(value))


def _check_token(value: str, what: str) -> str:
    if not value or any(ch.isspace() for ch in value) or value.startswith("#"):
        raise SchemaError(f"{what} id {value!r} cannot be written: ids must be non-empty without whitespace.")
    return value


# ----------------------------------------------------------------------
# Canonical instance format
# ----------------------------------------------------------------------
def instance_text(inst: Instance, echo: ConfigEcho | None = None) -> str:
    lines = [f"# {line}" for line in _header(INSTANCE_SCHEMA, echo)]
    lines.append("[params]")
    if inst.alpha is not None:
        lines.append(f"alpha {_num(inst.alpha)}")
    else:
        lines.append(f"lambda {_num(inst.lam)}")
    lines.append("[tasks]")
    for t, p in zip(inst.task_ids, inst.capacities):
        lines.append(f"{_check_token(t, 'task')} {int(p)}")
    lines.append("[nodes]")
    lines.extend(_check_token(v, "node") for v in inst.node_ids)
    lines.append("[edges]")
    for u, v, w in zip(inst.edge_u, inst.edge_v, inst.edge_w):
        lines.append(f"{inst.node_ids[u]} {inst.node_ids[v]} {_num(w)}")
    lines.append("[preferences]")
    pref = inst.preferences
    for row in range(inst.n_nodes):
        start, end = pref.indptr[row], pref.indptr[row + 1]
        for col, value in zip(pref.indices[start:end], pref.data[start:end]):
            lines.append(f"{inst.node_ids[row]} {inst.task_ids[col]} {_num(value)}")
    return "\n".join(lines) + "\n"


def instance_fingerprint(inst: Instance) -> str:
    return hashlib.sha256(instance_text(inst).encode("utf-8")).hexdigest()


def save_instance(inst: Instance, path: str | Path, echo: ConfigEcho | None = None) -> None:
    atomic_write_text(path, instance_text(inst, echo))
    logger.info("Instance saved to %s (%d nodes, %d tasks, %d edges)", path, inst.n_nodes, inst.n_tasks, inst.n_edges)


def _parse_float(token: str, where: str, field: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise SchemaError(f"{where}: field {field!r} is not a number: {token!r}") from exc


def parse_instance_text(text: str, source: str = "<string>") -> Instance:
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {INSTANCE_SCHEMA}":
        raise SchemaError(f"{source}:1: expected header '# {INSTANCE_SCHEMA}'")

    section: str | None = None
    seen: set[str] = set()
    alpha: float | None = None
    lam: float | None = None
    tasks: list[str] = []
    capacities: dict[str, int] = {}
    nodes: list[str] = []
    edges: list[tuple[str, str, float]] = []
    preferences: dict[tuple[str, str], float] = {}

    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise SchemaError(f"{where}: unknown section [{section}]")
            if section in seen:
                raise SchemaError(f"{where}: section [{section}] appears twice")
            seen.add(section)
            continue
        fields = line.split()
        if section is None:
            raise SchemaError(f"{where}: data before the first section header")

        if section == "params":
            if len(fields) != 2:
                raise SchemaError(f"{where}: expected 'alpha X' or 'lambda X'")
            key = fields[0].lower()
            value = _parse_float(fields[1], where, key)
            if key == "alpha":
                alpha = value
            elif key == "lambda":
                lam = value
            else:
                raise SchemaError(f"{where}: unknown parameter {fields[0]!r}")
            if alpha is not None and lam is not None:
                raise SchemaError(f"{where}: both alpha and lambda given; specify one")
        elif section == "tasks":
            if len(fields) != 2:
                raise SchemaError(f"{where}: expected 'task capacity'")
            capacity = _parse_float(fields[1], where, "capacity")
            if not np.isfinite(capacity) or capacity != int(capacity) or capacity < 0:
                raise SchemaError(f"{where}: capacity must be a non-negative integer, got {fields[1]!r}")
            tasks.append(fields[0])
            capacities[fields[0]] = int(capacity)
        elif section == "nodes":
            if len(fields) != 1:
                raise SchemaError(f"{where}: expected one node id per line")
            nodes.append(fields[0])
        elif section == "edges":
            if len(fields) != 3:
                raise SchemaError(f"{where}: expected 'u v weight'")
            edges.append((fields[0], fields[1], _parse_float(fields[2], where, "weight")))
        else:
            if len(fields) != 3:
                raise SchemaError(f"{where}: expected 'node task c'")
            key = (fields[0], fields[1])
            if key in preferences:
                raise SchemaError(f"{where}: duplicate preference for {key}")
            preferences[key] = _parse_float(fields[2], where, "c")

    missing = [s for s in ("tasks", "nodes") if s not in seen]
    if missing:
        raise SchemaError(f"{source}: missing section(s) {', '.join(missing)}")
    try:
        return Instance.build(nodes, tasks, capacities, edges, preferences, lam=lam, alpha=alpha)
    except InstanceError as exc:
        raise InstanceError(f"{source}: {exc}") from exc


def load_instance(
    path: str | Path,
    format: str = "canonical",
    *,
    preference: PreferenceFunction | str = PreferenceFunction.INVERSE,
    alpha: float | None = None,
    lam: float | None = None,
) -> Instance:
    """
    Load a canonical instance file or an education directory. For the
    canonical format `alpha`/`lam` override the values stored in the file.
    """
    path = Path(path)
    if format == "education":
        return load_education_instance(path, preference, alpha=alpha, lam=lam)
    if format != "canonical":
        raise SchemaError(f"Unknown instance format {format!r}.")
    if not path.exists():
        raise SchemaError(f"Instance file not found: {path}")
    inst = parse_instance_text(path.read_text(encoding="utf-8"), str(path))
    if alpha is not None and lam is not None:
        raise InstanceError("Specify either lambda or alpha, not both.")
    if alpha is not None:
        inst = inst.with_alpha(alpha)
    elif lam is not None:
        inst = inst.with_lambda(lam)
    logger.info("Loaded %s: %d nodes, %d tasks, %d edges, lambda=%.6g", path, inst.n_nodes, inst.n_tasks, inst.n_edges, inst.lam)
    return inst


# ----------------------------------------------------------------------
# Education CSVs
# ----------------------------------------------------------------------
def _read_csv(path: Path, schema: str, columns: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise SchemaError(f"Missing file {path}")
    with path.open(encoding="utf-8") as handle:
        header = handle.readline().strip()
    if header != f"# {schema}":
        raise SchemaError(f"{path}:1: expected header '# {schema}'")
    frame = pd.read_csv(path, comment="#", dtype=str, skipinitialspace=True)
    absent = [c for c in columns if c not in frame.columns]
    if absent:
        raise SchemaError(f"{path}: missing column(s) {', '.join(absent)}")
    if frame[list(columns)].isna().any().any():
        row = int(frame[list(columns)].isna().any(axis=1).to_numpy().argmax())
        raise SchemaError(f"{path}: empty field in data row {row + 1}")
    return frame


def load_rankings(directory: str | Path) -> RankingData:
    """rankings.csv plus friends.csv of an education directory."""
    directory = Path(directory)
    path = directory / RANKINGS_FILE
    frame = _read_csv(path, RANKINGS_SCHEMA, ("node", "task", "rank"))
    try:
        frame["rank"] = frame["rank"].astype(int)
    except ValueError as exc:
        raise SchemaError(f"{path}: field 'rank' must be an integer") from exc
    rankings: dict[str, tuple[str, ...]] = {}
    for node, group in frame.groupby("node", sort=False):
        ordered = group.sort_values("rank")
        expected = list(range(1, len(ordered) + 1))
        if ordered["rank"].tolist() != expected:
            raise SchemaError(f"{path}: ranks of {node!r} must be 1..{len(ordered)} without gaps")
        rankings[str(node)] = tuple(ordered["task"].tolist())

    friends_path = directory / FRIENDS_FILE
    friends: tuple[tuple[str, str], ...] = ()
    if friends_path.exists():
        pairs = _read_csv(friends_path, FRIENDS_SCHEMA, ("u", "v"))
        friends = tuple(zip(pairs["u"].tolist(), pairs["v"].tolist()))
    return RankingData(rankings, friends)


def load_education_instance(
    directory: str | Path,
    preference: PreferenceFunction | str = PreferenceFunction.INVERSE,
    *,
    alpha: float | None = None,
    lam: float | None = None,
) -> Instance:
    directory = Path(directory)
    data = load_rankings(directory)
    path = directory / CAPACITIES_FILE
    caps = _read_csv(path, CAPACITIES_SCHEMA, ("task", "capacity"))
    try:
        capacities = [int(c) for c in caps["capacity"]]
    except ValueError as exc:
        raise SchemaError(f"{path}: field 'capacity' must be an integer") from exc
    if alpha is None and lam is None:
        alpha = EDUCATION_ALPHA
    nodes = list(data.rankings)
    return education_instance(
        data,
        nodes,
        caps["task"].tolist(),
        capacities,
        PreferenceFunction(preference),
        alpha=alpha,
        lam=lam,
    )


def save_education(
    directory: str | Path,
    rankings: RankingData,
    capacities: Mapping[str, int],
    echo: ConfigEcho | None = None,
) -> None:
    directory = Path(directory)
    rows = [
        (node, task, position)
        for node, ranking in rankings.rankings.items()
        for position, task in enumerate(ranking, start=1)
    ]
    write_table(pd.DataFrame(rows, columns=["node", "task", "rank"]), directory / RANKINGS_FILE, _header(RANKINGS_SCHEMA, echo))
    write_table(pd.DataFrame(list(rankings.friends), columns=["u", "v"]), directory / FRIENDS_FILE, _header(FRIENDS_SCHEMA, echo))
    write_table(
        pd.DataFrame(list(capacities.items()), columns=["task", "capacity"]),
        directory / CAPACITIES_FILE,
        _header(CAPACITIES_SCHEMA, echo),
    )


# ----------------------------------------------------------------------
# Assignment files
# ----------------------------------------------------------------------
def assignment_text(inst: Instance, x: Assignment, echo: ConfigEcho | None = None) -> str:
    lines = [f"# {line}" for line in _header(ASSIGNMENT_SCHEMA, echo)]
    for node, task in x.as_mapping(inst).items():
        lines.append(f"{node} {task}")
    return "\n".join(lines) + "\n"


def save_assignment(inst: Instance, x: Assignment, path: str | Path, echo: ConfigEcho | None = None) -> None:
    atomic_write_text(path, assignment_text(inst, x, echo))


def load_assignment(inst: Instance, path: str | Path) -> Assignment:
    """
    Read `node task` pairs and validate them against the instance; a manual
    assignment that overfills a task is rejected with the task named.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"Assignment file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != f"# {ASSIGNMENT_SCHEMA}":
        raise SchemaError(f"{path}:1: expected header '# {ASSIGNMENT_SCHEMA}'")
    labels = np.full(inst.n_nodes, -1, dtype=np.int64)
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise SchemaError(f"{path}:{lineno}: expected 'node task'")
        node, task = fields
        if node not in inst.node_index:
            raise SchemaError(f"{path}:{lineno}: unknown node {node!r}")
        if task not in inst.task_index:
            raise SchemaError(f"{path}:{lineno}: unknown task {task!r}")
        v = inst.node_index[node]
        if labels[v] >= 0:
            raise SchemaError(f"{path}:{lineno}: node {node!r} assigned twice")
        labels[v] = inst.task_index[task]
    x = Assignment(labels)
    report = feasible(inst, x)
    if not report.ok:
        raise InfeasibleSolutionError(f"{path}: {report.describe()}", report.violations)
    return x


# ----------------------------------------------------------------------
# Reports and tables
# ----------------------------------------------------------------------
def save_report(report: SolveReport, path: str | Path) -> None:
    atomic_write_text(path, report.model_dump_json(indent=2, by_alias=True) + "\n")


def load_report(path: str | Path) -> SolveReport:
    path = Path(path)
    try:
        return SolveReport.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise SchemaError(f"{path}: invalid report: {exc}") from exc


def write_table(frame: pd.DataFrame, path: str | Path, header_lines: Iterable[str] = ()) -> None:
    """CSV with leading `# ...` provenance lines."""
    header = "".join(f"# {line}\n" for line in header_lines)
    atomic_write_text(path, header + frame.to_csv(index=False, lineterminator="\n"))


def read_table(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


# ----------------------------------------------------------------------
# Group labels (e.g. employee gender)
# ----------------------------------------------------------------------
def save_groups(
    inst: Instance,
    groups: Sequence[str] | np.ndarray,
    path: str | Path,
    echo: ConfigEcho | None = None,
) -> None:
    frame = pd.DataFrame({"node": list(inst.node_ids), "group": [str(g) for g in groups]})
    write_table(frame, path, _header(GROUPS_SCHEMA, echo))


def load_groups(inst: Instance, path: str | Path) -> np.ndarray:
    path = Path(path)
    frame = _read_csv(path, GROUPS_SCHEMA, ("node", "group"))
    mapping = dict(zip(frame["node"], frame["group"]))
    missing = [v for v in inst.node_ids if v not in mapping]
    if missing:
        raise SchemaError(f"{path}: no group for node {missing[0]!r}")
    return np.array([mapping[v] for v in inst.node_ids])
