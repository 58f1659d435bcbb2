"""Experiment orchestration: generation, two-stage validation and
resumable outcome recording."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import os
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import yaml

from .graph import ConfigKnowledgeGraph
from .index import ChunkIndex, NodeIndex
from .providers import make_embedder, make_generator
from .retrieval import GenerationError, StrategyId, Stores, run_strategy

log = logging.getLogger(__name__)

PASS, FAIL, NOT_RUN = "pass", "fail", "not-run"
SUCCESS, FAILED = "Success", "Failed"
SCRIPT_NAME = "main.tf"


class ConfigError(ValueError):
    pass


class ToolMissingError(EnvironmentError):
    pass


class ContractViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Configuration and prompt sets
# ---------------------------------------------------------------------------


@dataclass
class ValidatorConfig:
    mode: str = "stubbed"  # stubbed | external
    tv: str = "nonempty"
    iv: str = "nonempty"
    terraform_bin: str = "terraform"
    opa_bin: str = "opa"
    decision: str = "data.terraform.allow"
    timeout: float = 120.0
    override_file: Optional[str] = None  # endpoint override copied into each work dir


@dataclass
class ExperimentConfig:
    experiment_name: str
    strategy: StrategyId
    prompt_set: Path
    output_dir: Path
    graph: Optional[Path] = None
    chunk_index: Optional[Path] = None
    raw_node_index: Optional[Path] = None
    summary_node_index: Optional[Path] = None
    embedder: dict = field(default_factory=lambda: {"kind": "hashing"})
    generator: dict = field(default_factory=lambda: {"kind": "template"})
    validator: ValidatorConfig = field(default_factory=ValidatorConfig)
    workers: int = 4
    ref_depth: int = 2
    cutoff_date: str = "2023-10"

    def __post_init__(self) -> None:
        if not self.experiment_name:
            raise ConfigError("experiment_name must be non-empty")
        self.strategy = StrategyId.parse(str(self.strategy.value if isinstance(self.strategy, StrategyId)
                                             else self.strategy))

    def canonical(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return json.loads(json.dumps(d, default=str, sort_keys=True))

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.canonical(), sort_keys=True).encode()).hexdigest()

    def check_paths(self) -> None:
        missing = [str(p) for p in (self.prompt_set, self.graph, self.chunk_index, self.raw_node_index,
                                    self.summary_node_index) if p is not None and not Path(p).exists()]
        if missing:
            raise ConfigError(f"paths do not exist: {', '.join(missing)}")


_PATH_KEYS = ("prompt_set", "output_dir", "graph", "chunk_index", "raw_node_index", "summary_node_index")


def load_config(path: Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    raw.update(overrides or {})
    base = path.parent
    for key in _PATH_KEYS:
        if raw.get(key) is not None:
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else (base / p)
    if "output_dir" not in raw:
        raw["output_dir"] = base / "runs" / raw.get("experiment_name", "experiment")
    v = dict(raw.pop("validator", {}) or {})
    for key in ("tv", "iv"):
        spec = v.get(key)
        if isinstance(spec, str) and spec.startswith("table:"):
            tpath, _, col = spec[len("table:"):].partition("#")
            tp = Path(tpath)
            v[key] = f"table:{tp if tp.is_absolute() else base / tp}#{col}"
    if v.get("override_file") and not Path(v["override_file"]).is_absolute():
        v["override_file"] = str(base / v["override_file"])
    try:
        return ExperimentConfig(validator=ValidatorConfig(**v), **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class PromptCase:
    prompt_id: str
    text: str
    policy: Optional[Path] = None
    reference: Optional[Path] = None


def load_prompt_set(root: Path) -> list[PromptCase]:
    root = Path(root)
    cases = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        prompt = d / "prompt.txt"
        if not prompt.exists():
            log.warning("skipping %s: no prompt.txt", d)
            continue
        policies = sorted(d.glob("*.rego"))
        ref = d / "reference"
        cases.append(PromptCase(d.name, prompt.read_text(encoding="utf-8").strip(),
                                policies[0] if policies else None, ref if ref.is_dir() else None))
    ids = [c.prompt_id for c in cases]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate prompt ids")
    return cases


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationOutcome:
    script_id: str
    tv_status: str
    iv_status: str
    tv_log: str = ""
    iv_log: str = ""

    def __post_init__(self) -> None:
        if self.tv_status not in (PASS, FAIL):
            raise ValueError(f"bad tv_status {self.tv_status}")
        if (self.iv_status == NOT_RUN) != (self.tv_status == FAIL):
            raise ValueError("iv_status must be not-run exactly when technical validation failed")
        if self.iv_status not in (PASS, FAIL, NOT_RUN):
            raise ValueError(f"bad iv_status {self.iv_status}")

    @property
    def overall(self) -> str:
        return SUCCESS if self.tv_status == PASS and self.iv_status == PASS else FAILED

    @property
    def failure_stage(self) -> str:
        if self.tv_status == FAIL:
            return "technical"
        return "intent" if self.iv_status == FAIL else "none"

    def to_json(self) -> str:
        d = {"script_id": self.script_id, "tv_status": self.tv_status, "iv_status": self.iv_status,
             "overall": self.overall, "failure_stage": self.failure_stage,
             "tv_log": self.tv_log, "iv_log": self.iv_log}
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ValidationOutcome":
        d = json.loads(text)
        return cls(d["script_id"], d["tv_status"], d["iv_status"], d.get("tv_log", ""), d.get("iv_log", ""))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_outcomes(exp_dir: Path) -> dict[str, ValidationOutcome]:
    out = {}
    for p in sorted((Path(exp_dir) / "outcomes").glob("*.json")):
        o = ValidationOutcome.from_json(p.read_text(encoding="utf-8"))
        out[o.script_id] = o
    return out


@dataclass(frozen=True)
class Rate:
    n: int
    total: int

    @property
    def percent(self) -> Optional[float]:
        return 100.0 * self.n / self.total if self.total else None

    def __str__(self) -> str:
        p = self.percent
        return f"{'n/a' if p is None else f'{p:.1f}%'} ({self.n}/{self.total})"


@dataclass(frozen=True)
class StageSummary:
    tv: Rate
    iv_on_tv: Rate
    overall: Rate

    def to_dict(self) -> dict:
        return {k: {"n": r.n, "total": r.total, "percent": None if r.percent is None else round(r.percent, 1)}
                for k, r in (("tv", self.tv), ("iv_on_tv", self.iv_on_tv), ("overall", self.overall))}


def summarize(outcomes) -> StageSummary:
    outs = list(outcomes.values()) if isinstance(outcomes, Mapping) else list(outcomes)
    total = len(outs)
    tv = sum(o.tv_status == PASS for o in outs)
    iv = sum(o.iv_status == PASS for o in outs)
    overall = sum(o.overall == SUCCESS for o in outs)
    return StageSummary(Rate(tv, total), Rate(iv, tv), Rate(overall, total))


def render_summary(name: str, s: StageSummary) -> str:
    return "\n".join([
        f"# {name}", "",
        "| Stage | Rate |", "|---|---:|",
        f"| Technical validation | {s.tv} |",
        f"| Intent validation (of technical passes) | {s.iv_on_tv} |",
        f"| Overall success | {s.overall} |",
    ]) + "\n"


# ---------------------------------------------------------------------------
# Validators
# ---------------------------------------------------------------------------

StubPredicate = Callable[[str, str], bool]


def _read_table(path: Path, column: str) -> dict[str, bool]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and column not in rows[0]:
        raise ConfigError(f"{path}: no column {column!r}")
    return {r["prompt_id"]: r[column].strip().lower() in ("1", "true", "pass") for r in rows}


def make_stub(spec: str) -> StubPredicate:
    """``nonempty``, ``marker:<text>`` or ``table:<csv>#<column>``."""
    if spec == "nonempty":
        return lambda pid, script: bool(script.strip())
    if spec.startswith("marker:"):
        marker = spec[len("marker:"):]
        return lambda pid, script: marker in script
    if spec.startswith("table:"):
        path, _, col = spec[len("table:"):].partition("#")
        table = _read_table(Path(path), col)
        return lambda pid, script: table.get(pid, False)
    raise ConfigError(f"unknown stub predicate {spec!r}")


def _script(script_dir: Path) -> str:
    p = Path(script_dir) / SCRIPT_NAME
    return p.read_text(encoding="utf-8") if p.exists() else ""


def _require(binary: str) -> str:
    found = shutil.which(binary)
    if not found:
        raise ToolMissingError(f"required binary not found: {binary}")
    return found


def _run(argv: list[str], cwd: Path, timeout: float, env: Optional[dict] = None) -> tuple[int, str]:
    try:
        p = subprocess.run(argv, cwd=cwd, capture_output=True, text=True, timeout=timeout, env=env)
    except subprocess.TimeoutExpired as exc:
        out = (exc.stdout or "") + (exc.stderr or "") if isinstance(exc.stdout, str) else ""
        return 124, out + f"\nTIMEOUT after {timeout:.0f}s: {' '.join(argv)}\n"
    return p.returncode, p.stdout + p.stderr


def technical_validate(script_dir: Path, v: ValidatorConfig, prompt_id: str = "",
                       stub: Optional[StubPredicate] = None) -> tuple[str, str]:
    """init then plan; pass iff both succeed."""
    script_dir = Path(script_dir)
    if v.mode == "stubbed":
        stub = stub or make_stub(v.tv)
        ok = stub(prompt_id, _script(script_dir))
        return (PASS, "") if ok else (FAIL, "Error: Stub technical validation failed\n\nrejected by stub predicate\n")
    tf = _require(v.terraform_bin)
    if v.override_file:
        shutil.copy(v.override_file, script_dir / Path(v.override_file).name)
    env = dict(os.environ, TF_IN_AUTOMATION="1", TF_PLUGIN_CACHE_DIR=str(script_dir / ".plugin-cache"))
    (script_dir / ".plugin-cache").mkdir(exist_ok=True)
    code, out = _run([tf, "init", "-input=false", "-no-color"], script_dir, v.timeout, env)
    if code != 0:
        return FAIL, out
    code2, out2 = _run([tf, "plan", "-input=false", "-no-color", "-out=tfplan"], script_dir, v.timeout, env)
    return (PASS if code2 == 0 else FAIL), out + out2


def intent_validate(script_dir: Path, policy: Optional[Path], v: ValidatorConfig, tv_status: str,
                    prompt_id: str = "", stub: Optional[StubPredicate] = None) -> tuple[str, str]:
    """Evaluate the intent policy against the plan's JSON representation."""
    if tv_status != PASS:
        raise ContractViolation("intent validation requires a technical pass")
    script_dir = Path(script_dir)
    if v.mode == "stubbed":
        stub = stub or make_stub(v.iv)
        ok = stub(prompt_id, _script(script_dir))
        return (PASS, "") if ok else (FAIL, "policy decision: deny (stub)\n")
    tf, opa = _require(v.terraform_bin), _require(v.opa_bin)
    if policy is None or not Path(policy).exists():
        return FAIL, "intent validation error: no policy file\n"
    code, plan_json = _run([tf, "show", "-json", "tfplan"], script_dir, v.timeout)
    if code != 0:
        return FAIL, plan_json
    (script_dir / "plan.json").write_text(plan_json, encoding="utf-8")
    code, out = _run([opa, "eval", "--format", "json", "--data", str(policy), "--input", "plan.json", v.decision],
                     script_dir, v.timeout)
    if code != 0:
        return FAIL, f"intent validation error: {out}"
    try:
        value = json.loads(out)["result"][0]["expressions"][0]["value"]
    except (ValueError, KeyError, IndexError) as exc:
        return FAIL, f"intent validation error: unreadable evaluator output ({exc})\n{out}"
    return (PASS if value is True else FAIL), out


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def load_stores(cfg: ExperimentConfig) -> Stores:
    def read(p):
        return Path(p).read_text(encoding="utf-8") if p else None

    try:
        g = ConfigKnowledgeGraph.import_lines(read(cfg.graph)) if cfg.graph else None
        ci = ChunkIndex.from_lines(read(cfg.chunk_index)) if cfg.chunk_index else None
        rn = NodeIndex.from_lines(read(cfg.raw_node_index)) if cfg.raw_node_index else None
        sn = NodeIndex.from_lines(read(cfg.summary_node_index)) if cfg.summary_node_index else None
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load stores: {exc}") from exc
    return Stores(g, ci, rn, sn)


@dataclass
class RunResult:
    output_dir: Path
    executed: list[str]
    skipped: list[str]
    outcomes: dict[str, ValidationOutcome]


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def run_experiment(cfg: ExperimentConfig, max_prompts: Optional[int] = None) -> RunResult:
    """Generate and validate every prompt; completed prompts are skipped.

    ``max_prompts`` bounds how many new prompts this call executes, which
    is how tests simulate an interrupted run.
    """
    cfg.check_paths()
    cases = load_prompt_set(cfg.prompt_set)
    stores = load_stores(cfg)
    embedder = make_embedder(cfg.embedder)
    generator = make_generator(cfg.generator)
    v = cfg.validator
    tv_stub = make_stub(v.tv) if v.mode == "stubbed" else None
    iv_stub = make_stub(v.iv) if v.mode == "stubbed" else None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    if manifest.get("config_hash") not in (None, cfg.config_hash()):
        log.warning("config changed since the previous run of %s", out)
    manifest.update({
        "experiment_name": cfg.experiment_name, "strategy": cfg.strategy.value,
        "config_hash": cfg.config_hash(), "config": cfg.canonical(),
        "embedder": getattr(embedder, "model_id", ""), "generator": getattr(generator, "model_id", ""),
        "prompt_count": len(cases),
    })
    manifest.setdefault("runs", []).append({"started": _now()})
    _atomic_write(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    done = {p.stem for p in (out / "outcomes").glob("*.json")} if (out / "outcomes").exists() else set()
    todo = [c for c in cases if c.prompt_id not in done]
    skipped = [c.prompt_id for c in cases if c.prompt_id in done]
    if max_prompts is not None:
        todo = todo[:max_prompts]

    def one(case: PromptCase) -> ValidationOutcome:
        work = out / "work" / case.prompt_id
        if work.exists():
            shutil.rmtree(work)
        work.mkdir(parents=True)
        try:
            res = run_strategy(cfg.strategy, case.text, stores, embedder, generator, cfg.ref_depth)
            (work / "prompt.txt").write_text(res.prompt, encoding="utf-8")
            (work / "context.json").write_text(json.dumps(res.context.to_dict(), indent=1, sort_keys=True) + "\n",
                                               encoding="utf-8")
            (work / SCRIPT_NAME).write_text(res.generated_code, encoding="utf-8")
            tv, tv_log = technical_validate(work, v, case.prompt_id, tv_stub)
            iv, iv_log = NOT_RUN, ""
            if tv == PASS:
                iv, iv_log = intent_validate(work, case.policy, v, tv, case.prompt_id, iv_stub)
        except (GenerationError, OSError, subprocess.SubprocessError) as exc:
            log.error("prompt %s failed: %s", case.prompt_id, exc)
            if isinstance(exc, GenerationError):
                (work / "prompt.txt").write_text(exc.prompt, encoding="utf-8")
            tv, tv_log, iv, iv_log = FAIL, f"Error: Pipeline failure\n\n{exc}\n", NOT_RUN, ""
        outcome = ValidationOutcome(case.prompt_id, tv, iv, tv_log, iv_log)
        if tv_log:
            _atomic_write(out / "logs" / f"{case.prompt_id}.log", tv_log)
        _atomic_write(out / "outcomes" / f"{case.prompt_id}.json", outcome.to_json())
        return outcome

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(one, todo))

    outcomes = load_outcomes(out)
    manifest["runs"][-1]["finished"] = _now()
    manifest["runs"][-1]["executed"] = len(results)
    manifest["completed"] = len(outcomes)
    _atomic_write(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    if len(outcomes) == len(cases):
        _atomic_write(out / "summary.md", render_summary(cfg.experiment_name, summarize(outcomes)))
    return RunResult(out, [o.script_id for o in results], skipped, outcomes)


def outcome_pairs(outcomes: Mapping[str, ValidationOutcome]) -> dict[str, tuple[bool, bool]]:
    """prompt id -> (tv_pass, iv_pass) for the stats module."""
    return {k: (o.tv_status == PASS, o.iv_status == PASS) for k, o in outcomes.items()}
