"""Compile/execute verification with bounded LLM repair rounds."""
from __future__ import annotations

import enum
import logging
import os
import re
import shlex
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from . import java
from .assembly import CandidateTest, ClasspathIndex, revise, write_candidate
from .errors import EmptyReplyError, ParseError, ToolchainUnavailable
from .llm import Backend, ChatOptions
from .prompting import PromptRenderer, enforce_token_budget, parse_llm_reply
from .query import Query

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepairBudget:
    compile_max: int = 3
    exec_max: int = 2

    def __post_init__(self):
        if self.compile_max < 0 or self.exec_max < 0:
            raise ValueError("repair budgets must be >= 0")


class Status(str, enum.Enum):
    PASSED = "passed"
    COMPILE_FAILED = "compile_failed"
    EXECUTION_FAILED = "execution_failed"
    ABORTED_EMPTY_REPLY = "aborted_empty_reply"


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    output: str = ""


@dataclass(frozen=True)
class TranscriptEntry:
    phase: str  # "compile" or "execute"
    error_text: str
    revision: int


@dataclass
class VerificationOutcome:
    status: Status
    compile_attempts: int
    exec_attempts: int
    final_candidate: CandidateTest | None
    transcript: list[TranscriptEntry] = field(default_factory=list)
    focal_invoked: bool = False
    query_id: str = ""
    focal_key: str = ""
    stages: list[dict] = field(default_factory=list)
    error: str = ""

    @property
    def attempts(self) -> int:
        return self.compile_attempts + self.exec_attempts

    @property
    def correct(self) -> bool:
        return self.status is Status.PASSED and self.focal_invoked

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "focal_key": self.focal_key,
            "status": self.status.value,
            "compile_attempts": self.compile_attempts,
            "exec_attempts": self.exec_attempts,
            "focal_invoked": self.focal_invoked,
            "stages": list(self.stages),
            "transcript": [{"phase": t.phase, "error_text": t.error_text, "revision": t.revision}
                           for t in self.transcript],
            "final_candidate": self.final_candidate.to_dict() if self.final_candidate else None,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationOutcome":
        cand = d.get("final_candidate")
        return cls(
            status=Status(d["status"]),
            compile_attempts=int(d.get("compile_attempts", 0)),
            exec_attempts=int(d.get("exec_attempts", 0)),
            final_candidate=CandidateTest.from_dict(cand) if cand else None,
            transcript=[TranscriptEntry(t["phase"], t["error_text"], int(t["revision"]))
                        for t in d.get("transcript", [])],
            focal_invoked=bool(d.get("focal_invoked", False)),
            query_id=d.get("query_id", ""),
            focal_key=d.get("focal_key", ""),
            stages=list(d.get("stages", [])),
            error=d.get("error", ""),
        )


# ---------------------------------------------------------------------------
# toolchains


class Toolchain(Protocol):
    def compile(self, candidate: CandidateTest, workspace: Path) -> CheckResult: ...

    def execute(self, candidate: CandidateTest, workspace: Path) -> CheckResult: ...


class CommandToolchain:
    """Runs configurable ``javac`` and JUnit runner command templates.

    Templates are formatted with ``{source}``, ``{source_root}``, ``{classes}``,
    ``{classpath}``, ``{test_class}``, ``{test_method}`` and ``{pathsep}``, then
    split shell-style (no shell is involved).
    """

    DEFAULT_JAVAC = "javac -nowarn -d {classes} -cp {classpath} {source}"
    DEFAULT_RUN = ("java -jar {junit_console_jar} execute --disable-banner "
                   "-cp {classes}{pathsep}{classpath} --select-method {test_class}#{test_method}")

    def __init__(self, javac_cmd: str = DEFAULT_JAVAC, junit_run_cmd: str = DEFAULT_RUN,
                 classpath: Sequence[str] | str = (), junit_console_jar: str = "",
                 timeout: float = 120.0):
        self.javac_cmd = javac_cmd
        self.junit_run_cmd = junit_run_cmd
        self.classpath = classpath if isinstance(classpath, str) else os.pathsep.join(map(str, classpath))
        self.junit_console_jar = junit_console_jar
        self.timeout = timeout

    def _fields(self, candidate: CandidateTest, workspace: Path) -> dict:
        src_root = workspace / "src" / "test" / "java"
        return {
            "source": str(src_root / candidate.relative_path),
            "source_root": str(src_root),
            "classes": str(workspace / "classes"),
            "classpath": self.classpath or ".",
            "test_class": candidate.qualified_class,
            "test_method": candidate.test_method_name,
            "pathsep": os.pathsep,
            "junit_console_jar": self.junit_console_jar,
        }

    def _run(self, template: str, fields: dict, cwd: Path) -> subprocess.CompletedProcess:
        argv = [part.format(**fields) for part in shlex.split(template)]
        if shutil.which(argv[0]) is None:
            raise ToolchainUnavailable(f"command not found: {argv[0]}")
        try:
            return subprocess.run(argv, cwd=cwd, capture_output=True, text=True, timeout=self.timeout)
        except FileNotFoundError as exc:
            raise ToolchainUnavailable(str(exc)) from exc
        except subprocess.TimeoutExpired as exc:
            return subprocess.CompletedProcess(argv, 124, exc.stdout or "",
                                               f"timed out after {self.timeout}s")

    def compile(self, candidate: CandidateTest, workspace: Path) -> CheckResult:
        workspace = Path(workspace)
        write_candidate(candidate, workspace / "src" / "test" / "java")
        (workspace / "classes").mkdir(parents=True, exist_ok=True)
        proc = self._run(self.javac_cmd, self._fields(candidate, workspace), workspace)
        return CheckResult(proc.returncode == 0, proc.stderr if proc.stderr else proc.stdout)

    def execute(self, candidate: CandidateTest, workspace: Path) -> CheckResult:
        workspace = Path(workspace)
        proc = self._run(self.junit_run_cmd, self._fields(candidate, workspace), workspace)
        return CheckResult(proc.returncode == 0, (proc.stdout + proc.stderr).strip("\n"))


def _as_result(item) -> CheckResult:
    if item is None or item is True or item == "ok":
        return CheckResult(True)
    if isinstance(item, CheckResult):
        return item
    return CheckResult(False, str(item))


class ScriptedToolchain:
    """Fake toolchain replaying canned results in order (``ok`` once a script runs out).

    Script items are ``None``/``True``/``"ok"`` for success, or error text.
    """

    def __init__(self, compile_script: Sequence = (), exec_script: Sequence = ()):
        self.compile_script = list(compile_script)
        self.exec_script = list(exec_script)
        self.compile_calls = 0
        self.exec_calls = 0

    def compile(self, candidate, workspace) -> CheckResult:
        i, self.compile_calls = self.compile_calls, self.compile_calls + 1
        return _as_result(self.compile_script[i] if i < len(self.compile_script) else None)

    def execute(self, candidate, workspace) -> CheckResult:
        i, self.exec_calls = self.exec_calls, self.exec_calls + 1
        return _as_result(self.exec_script[i] if i < len(self.exec_script) else None)


class RuleToolchain:
    """Fake toolchain that fails a check when a regex matches the candidate source."""

    def __init__(self, compile_rules: Sequence[dict] = (), exec_rules: Sequence[dict] = ()):
        self.compile_rules = [(re.compile(r["pattern"]), r.get("message", "error")) for r in compile_rules]
        self.exec_rules = [(re.compile(r["pattern"]), r.get("message", "failure")) for r in exec_rules]

    @staticmethod
    def _check(rules, candidate: CandidateTest) -> CheckResult:
        hits = [msg for rx, msg in rules if rx.search(candidate.source_file)]
        return CheckResult(not hits, "\n".join(hits))

    def compile(self, candidate, workspace) -> CheckResult:
        return self._check(self.compile_rules, candidate)

    def execute(self, candidate, workspace) -> CheckResult:
        return self._check(self.exec_rules, candidate)


def make_toolchain(config: dict | None) -> Toolchain:
    config = dict(config or {})
    kind = config.pop("kind", "command")
    if kind == "command":
        return CommandToolchain(
            javac_cmd=config.get("javac_cmd", CommandToolchain.DEFAULT_JAVAC),
            junit_run_cmd=config.get("junit_run_cmd", CommandToolchain.DEFAULT_RUN),
            classpath=config.get("classpath", ()),
            junit_console_jar=config.get("junit_console_jar", ""),
            timeout=float(config.get("timeout", 120.0)),
        )
    if kind == "rules":
        return RuleToolchain(config.get("compile_rules", ()), config.get("exec_rules", ()))
    raise ToolchainUnavailable(f"unknown toolchain kind {kind!r}")


def compile(candidate: CandidateTest, workspace, toolchain: Toolchain) -> CheckResult:  # noqa: A001
    return toolchain.compile(candidate, Path(workspace))


def execute(candidate: CandidateTest, workspace, toolchain: Toolchain) -> CheckResult:
    return toolchain.execute(candidate, Path(workspace))


# ---------------------------------------------------------------------------
# repair loop


@dataclass
class RepairContext:
    """Everything the loop needs to talk to the model and rebuild candidates."""

    llm: Backend
    options: ChatOptions = field(default_factory=ChatOptions)
    renderer: PromptRenderer = field(default_factory=PromptRenderer)
    token_budget: int = 4096
    junit: str = "4"
    index: ClasspathIndex | None = None
    stages: list | None = None  # when set, each repair request is logged here


def repair_loop(candidate: CandidateTest, query: Query, budget: RepairBudget, llm: Backend | RepairContext,
                toolchain: Toolchain, workspace=".") -> VerificationOutcome:
    """Compile, then execute, feeding failures back to the model.

    At most ``budget.compile_max`` compile repairs and ``budget.exec_max``
    execution repairs are requested.  A repaired candidate always re-enters at
    the compile check; the originally assembled candidate's first checks are
    free.
    """
    ctx = llm if isinstance(llm, RepairContext) else RepairContext(llm)
    workspace = Path(workspace)
    compile_attempts = exec_attempts = 0
    transcript: list[TranscriptEntry] = []
    cand = candidate

    def outcome(status: Status, error: str = "") -> VerificationOutcome:
        return VerificationOutcome(status, compile_attempts, exec_attempts, cand, transcript,
                                   query_id=query.id, focal_key=query.focal_key,
                                   stages=list(ctx.stages or ()), error=error)

    while True:
        res = toolchain.compile(cand, workspace)
        if not res.ok:
            transcript.append(TranscriptEntry("compile", res.output, cand.revision))
            if compile_attempts >= budget.compile_max:
                return outcome(Status.EXECUTION_FAILED if exec_attempts else Status.COMPILE_FAILED)
            compile_attempts += 1
            bundle = ctx.renderer.render_compile_feedback_prompt(cand, res.output, query)
        else:
            res = toolchain.execute(cand, workspace)
            if res.ok:
                transcript.append(TranscriptEntry("execute", "", cand.revision))
                return outcome(Status.PASSED)
            transcript.append(TranscriptEntry("execute", res.output, cand.revision))
            if exec_attempts >= budget.exec_max:
                return outcome(Status.EXECUTION_FAILED)
            exec_attempts += 1
            bundle = ctx.renderer.render_exec_feedback_prompt(cand, res.output, query)

        bundle = enforce_token_budget(bundle, ctx.token_budget, ctx.renderer.tokenizer)
        request = ctx.options.request(bundle.messages())
        reply = ctx.llm.complete(request)
        if ctx.stages is not None:
            ctx.stages.append({"stage": bundle.stage, "request_hash": request.hash()})
        try:
            code = parse_llm_reply(reply.content)
        except EmptyReplyError as exc:
            return outcome(Status.ABORTED_EMPTY_REPLY, str(exc))
        cand = revise(cand, code, query, ctx.junit, ctx.index)


# ---------------------------------------------------------------------------
# focal invocation


def _focal_overloads(query: Query) -> list[java.MethodDecl]:
    name = query.focal_method_name
    found = []
    if query.focal_source:
        for cls in java.top_level_classes(query.focal_source):
            if cls.name == query.class_name:
                found = [m for m in cls.methods if m.name == name]
    if not found:
        tree = java.parse("abstract class __Sig__ { abstract " + query.focal_method_signature + "; }")
        cls = tree.root_node.named_children[0]
        found = [java.method_decl(m) for m in java.method_nodes(cls)]
    return found


def invokes_focal(candidate: CandidateTest, query: Query) -> bool:
    """Static check that the test calls the focal method, directly or via one helper.

    A call counts when its simple name matches and its argument count fits one
    of the focal method's overloads.
    """
    tree = java.parse(candidate.source_file)
    if tree.root_node.has_error:
        return False
    overloads = _focal_overloads(query)
    if not overloads:
        return False
    name = query.focal_method_name
    methods = {}
    tests = []
    for n in java.walk(tree.root_node):
        if n.type == "method_declaration":
            decl = java.method_decl(n)
            methods.setdefault(decl.name, []).append(n)
            if "Test" in decl.annotations:
                tests.append(n)

    def calls(node):
        return [c for c in java.walk(node) if c.type == "method_invocation"]

    def direct(node) -> bool:
        return any(java.invocation_name(c) == name and
                   any(o.accepts(java.invocation_arity(c)) for o in overloads)
                   for c in calls(node))

    for t in tests:
        if direct(t):
            return True
        # one level of helper expansion inside the test class
        for c in calls(t):
            if java.invocation_object(c) in (None, "this"):
                for helper in methods.get(java.invocation_name(c), []):
                    if helper is not t and direct(helper):
                        return True
    return False
