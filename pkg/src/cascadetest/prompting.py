"""Prompt rendering for the prefix, oracle, direct and repair interactions.

Every prompt has four parts laid out in order: role, task, demonstrations,
target.  The target is rendered in the same shape as a demonstration with
the answer slot left empty.
"""
from __future__ import annotations

import enum
import math
import re
import textwrap
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

from .corpus import PLACEHOLDER, OracleDemo, PrefixDemo
from .errors import BudgetUnsatisfiable, CascadeOrderError, ConfigError, EmptyReplyError, IncompleteQuery
from .query import Query, test_method_name
from .selection import SelectedDemos

END_MARKER = "END_OF_DEMO"
INDENT = "    "


class InstructionVariant(str, enum.Enum):
    WELL_CRAFTED = "well_crafted"
    VANILLA = "vanilla"


class GenerationMode(str, enum.Enum):
    CASCADED = "cascaded"
    DIRECT = "direct"


@dataclass(frozen=True)
class PromptTemplates:
    role: str = "You are a proficient and helpful assistant in java testing with JUnit framework"
    prefix_task: str = (
        "Your task now is only to construct the test inputs, not the test assertions. "
        "Use CLASS_CONSTRUCTOR to get CLASS_NAME, then call TEST_METHOD_NAME. "
        "Use Java without comments. End your reply with END_OF_DEMO."
    )
    oracle_task: str = (
        "Your task now is to generate a test assertion to replace the <OraclePlaceHolder> in "
        "UNIT_TEST. Only variables that occur in the last UNIT_TEST can be used. "
        "Use Java without comments. End your reply with END_OF_DEMO."
    )
    direct_task: str = (
        "Your task now is to construct a complete unit test, including the test inputs and "
        "the test assertions. Use CLASS_CONSTRUCTOR to get CLASS_NAME, then call "
        "TEST_METHOD_NAME. Use Java without comments. End your reply with END_OF_DEMO."
    )
    vanilla_prefix_task: str = "Generate test input using the following Java code"
    vanilla_oracle_task: str = "Generate oracle using the following Java code"
    vanilla_direct_task: str = "Generate unit test using the following Java code"
    compile_feedback_task: str = (
        "The following unit test fails to compile. Fix it using COMPILATION_ERRORS. "
        "Reply with the complete fixed test class in Java without comments. "
        "End your reply with END_OF_DEMO."
    )
    exec_feedback_task: str = (
        "The following unit test compiles but fails when executed. Fix it using "
        "EXECUTION_ERRORS. Reply with the complete fixed test class in Java without comments. "
        "End your reply with END_OF_DEMO."
    )
    demo_header: str = "### Example"
    target_header: str = "### Target"

    @classmethod
    def from_overrides(cls, overrides: dict | None) -> "PromptTemplates":
        if not overrides:
            return cls()
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown template keys: {sorted(unknown)}")
        return cls(**overrides)


DEFAULT_TEMPLATES = PromptTemplates()


# ---------------------------------------------------------------------------
# token accounting

_TOKEN = re.compile(r"\w+|[^\w\s]")
SAFETY_FACTOR = 1.3


def approx_token_count(text: str) -> int:
    """Whitespace/punctuation token count scaled by a safety factor."""
    return math.ceil(len(_TOKEN.findall(text)) * SAFETY_FACTOR)


Tokenizer = Callable[[str], int]


@dataclass(frozen=True)
class PromptBundle:
    role_text: str
    task_text: str
    demo_block: str
    target_block: str
    rendered: str
    token_count: int
    stage: str = ""
    demo_texts: tuple[str, ...] = ()
    demo_similarities: tuple[float, ...] = ()

    def messages(self) -> list[dict]:
        """Chat messages: the role definition as system, everything else as user."""
        return [
            {"role": "system", "content": self.role_text.strip()},
            {"role": "user", "content": (self.task_text + self.demo_block + self.target_block).strip()},
        ]


def make_bundle(role: str, task: str, demo_texts: Sequence[str], target: str, *,
                stage: str, similarities: Sequence[float] = (),
                tokenizer: Tokenizer = approx_token_count) -> PromptBundle:
    role_text = role.rstrip("\n") + "\n\n"
    task_text = task.rstrip("\n") + "\n\n"
    demo_block = "".join(demo_texts)
    rendered = role_text + task_text + demo_block + target
    sims = tuple(float(s) for s in similarities) or (0.0,) * len(demo_texts)
    return PromptBundle(role_text, task_text, demo_block, target, rendered, tokenizer(rendered),
                        stage, tuple(demo_texts), sims)


# ---------------------------------------------------------------------------
# layouts


def _indent_body(body: str) -> str:
    return textwrap.indent(body.strip("\n"), INDENT) if body.strip() else ""


def _method(name: str, body: str) -> str:
    inner = _indent_body(body)
    return f"@Test\npublic void {name}() {{\n" + (inner + "\n" if inner else "") + "}"


def _prefix_layout(header: str, class_name: str, constructor: str, signature: str, test_name: str,
                   prefix: str) -> str:
    return (f"{header}\nCLASS_NAME: {class_name}\nCLASS_CONSTRUCTOR: {constructor}\n"
            f"FOCAL_METHOD_SIGNATURE: {signature}\nTEST_METHOD_NAME: {test_name}\nTEST_PREFIX:\n"
            + (prefix.strip("\n") + "\n" if prefix else ""))


def _oracle_layout(header: str, signature: str, test_name: str, body_with_placeholder: str,
                   oracle: str) -> str:
    return (f"{header}\nFOCAL_METHOD_SIGNATURE: {signature}\nUNIT_TEST:\n"
            f"{_method(test_name, body_with_placeholder)}\nTEST_ORACLE:\n"
            + (oracle.strip("\n") + "\n" if oracle else ""))


def _direct_layout(header: str, class_name: str, constructor: str | None, signature: str,
                   test_name: str, body: str) -> str:
    ctor = f"CLASS_CONSTRUCTOR: {constructor}\n" if constructor is not None else ""
    unit = _method(test_name, body) + "\n" if body else ""
    return (f"{header}\nCLASS_NAME: {class_name}\n{ctor}FOCAL_METHOD_SIGNATURE: {signature}\n"
            f"TEST_METHOD_NAME: {test_name}\nUNIT_TEST:\n{unit}")


def _end(block: str) -> str:
    return block + END_MARKER + "\n\n"


class PromptRenderer:
    def __init__(self, templates: PromptTemplates = DEFAULT_TEMPLATES,
                 tokenizer: Tokenizer = approx_token_count):
        self.t = templates
        self.tokenizer = tokenizer

    def _task(self, stage: str, variant: InstructionVariant) -> str:
        if InstructionVariant(variant) is InstructionVariant.VANILLA:
            return getattr(self.t, f"vanilla_{stage}_task")
        return getattr(self.t, f"{stage}_task")

    def render_prefix_prompt(self, query: Query, demos: SelectedDemos,
                             variant: InstructionVariant = InstructionVariant.WELL_CRAFTED) -> PromptBundle:
        query.check_complete()
        texts = []
        for d in demos.demos:
            if not isinstance(d, PrefixDemo):
                raise TypeError("prefix prompt needs prefix demos")
            texts.append(_end(_prefix_layout(self.t.demo_header, d.focal_class, d.constructor_params,
                                             d.focal_method_signature, d.test_name, d.test_prefix)))
        target = _prefix_layout(self.t.target_header, query.class_name, query.constructor_signature,
                                query.focal_method_signature, test_method_name(query.focal_method_name), "")
        return make_bundle(self.t.role, self._task("prefix", variant), texts, target, stage="prefix",
                           similarities=demos.similarities, tokenizer=self.tokenizer)

    def render_oracle_prompt(self, query: Query, generated_prefix: str, demos: SelectedDemos,
                             variant: InstructionVariant = InstructionVariant.WELL_CRAFTED) -> PromptBundle:
        if not generated_prefix or not generated_prefix.strip():
            raise CascadeOrderError("oracle prompt needs the generated prefix first")
        query.check_complete()
        texts = []
        for d in demos.demos:
            if not isinstance(d, OracleDemo):
                raise TypeError("oracle prompt needs oracle demos")
            texts.append(_end(_oracle_layout(self.t.demo_header, d.focal_method_signature, d.test_name,
                                             d.test_body_with_placeholder, d.test_oracle)))
        body = generated_prefix.strip("\n") + "\n" + PLACEHOLDER
        target = _oracle_layout(self.t.target_header, query.focal_method_signature,
                                test_method_name(query.focal_method_name), body, "")
        return make_bundle(self.t.role, self._task("oracle", variant), texts, target, stage="oracle",
                           similarities=demos.similarities, tokenizer=self.tokenizer)

    def render_direct_prompt(self, query: Query, demos: SelectedDemos,
                             variant: InstructionVariant = InstructionVariant.WELL_CRAFTED) -> PromptBundle:
        query.check_complete()
        texts = []
        for d in demos.demos:
            if isinstance(d, OracleDemo):
                texts.append(_end(_direct_layout(self.t.demo_header, d.focal_class or "?", None,
                                                 d.focal_method_signature, d.test_name, d.full_body)))
            else:
                raise TypeError("direct prompt needs oracle-pool demos (full test bodies)")
        target = _direct_layout(self.t.target_header, query.class_name, query.constructor_signature,
                                query.focal_method_signature, test_method_name(query.focal_method_name), "")
        return make_bundle(self.t.role, self._task("direct", variant), texts, target, stage="direct",
                           similarities=demos.similarities, tokenizer=self.tokenizer)

    def _feedback(self, stage: str, label: str, source: str, errors: str, query: Query) -> PromptBundle:
        focal_class = query.focal_source.strip() or query.class_name
        target = (f"FOCAL_METHOD_SIGNATURE: {query.focal_method_signature}\n"
                  f"FOCAL_CLASS:\n{focal_class}\n"
                  f"{label}:\n" + (errors.rstrip("\n") + "\n" if errors else "")
                  + f"UNIT_TEST:\n{source.rstrip()}\nFIXED_UNIT_TEST:\n")
        return make_bundle(self.t.role, getattr(self.t, f"{stage}_feedback_task"), [], target,
                           stage=f"{stage}_repair", tokenizer=self.tokenizer)

    def render_compile_feedback_prompt(self, candidate, compile_errors: str, query: Query) -> PromptBundle:
        return self._feedback("compile", "COMPILATION_ERRORS", candidate.source_file, compile_errors, query)

    def render_exec_feedback_prompt(self, candidate, exec_errors: str, query: Query) -> PromptBundle:
        return self._feedback("exec", "EXECUTION_ERRORS", candidate.source_file, exec_errors, query)


_DEFAULT = PromptRenderer()


def render_prefix_prompt(query, demos, variant=InstructionVariant.WELL_CRAFTED) -> PromptBundle:
    return _DEFAULT.render_prefix_prompt(query, demos, variant)


def render_oracle_prompt(query, generated_prefix, demos, variant=InstructionVariant.WELL_CRAFTED) -> PromptBundle:
    return _DEFAULT.render_oracle_prompt(query, generated_prefix, demos, variant)


def render_direct_prompt(query, demos, variant=InstructionVariant.WELL_CRAFTED) -> PromptBundle:
    return _DEFAULT.render_direct_prompt(query, demos, variant)


def render_compile_feedback_prompt(candidate, compile_errors, query) -> PromptBundle:
    return _DEFAULT.render_compile_feedback_prompt(candidate, compile_errors, query)


def render_exec_feedback_prompt(candidate, exec_errors, query) -> PromptBundle:
    return _DEFAULT.render_exec_feedback_prompt(candidate, exec_errors, query)


# ---------------------------------------------------------------------------
# budget


def enforce_token_budget(bundle: PromptBundle, budget: int,
                         tokenizer: Tokenizer = approx_token_count) -> PromptBundle:
    """Drop whole demos, lowest similarity first, until the prompt fits ``budget``."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    if tokenizer(bundle.rendered) <= budget:
        return bundle
    fixed = bundle.role_text + bundle.task_text + bundle.target_block
    if tokenizer(fixed) > budget:
        raise BudgetUnsatisfiable(
            f"role, task and target alone need {tokenizer(fixed)} tokens (budget {budget})")
    keep = list(range(len(bundle.demo_texts)))
    # lowest similarity first; among equals drop the later demo
    drop_order = sorted(keep, key=lambda i: (bundle.demo_similarities[i], -i))
    for i in drop_order:
        keep.remove(i)
        demo_block = "".join(bundle.demo_texts[j] for j in keep)
        rendered = bundle.role_text + bundle.task_text + demo_block + bundle.target_block
        count = tokenizer(rendered)
        if count <= budget:
            return replace(bundle, demo_block=demo_block, rendered=rendered, token_count=count,
                           demo_texts=tuple(bundle.demo_texts[j] for j in keep),
                           demo_similarities=tuple(bundle.demo_similarities[j] for j in keep))
    raise BudgetUnsatisfiable("prompt does not fit even without demos")  # unreachable given the check above


# ---------------------------------------------------------------------------
# replies

_FENCE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.S)
_CODE_START = ("@", "}", "{", "import ", "package ", "//", "/*", "return ", "try", "public ",
               "private ", "protected ", "class ", "final ", "static ")


def looks_like_code(line: str) -> bool:
    s = line.strip()
    if not s:
        return False
    if s.endswith((";", "{", "}", ");")) or s.startswith(_CODE_START):
        return True
    # a lone statement continuation such as ``foo(a,`` or ``.bar()``
    return bool(re.match(r"^[\w.$<>\[\]]+\s*(\(|=|\.)", s)) and not s.endswith((".", ":", "?", "!"))


def parse_llm_reply(raw: str) -> str:
    """Extract the code fragment from a model reply."""
    text = raw.split(END_MARKER, 1)[0]
    fence = _FENCE.search(text)
    if fence:
        text = fence.group(1)
    lines = text.splitlines()
    start = next((i for i, ln in enumerate(lines) if looks_like_code(ln)), None)
    if start is None:
        raise EmptyReplyError("reply contains no code")
    end = max(i for i, ln in enumerate(lines) if looks_like_code(ln))
    fragment = textwrap.dedent("\n".join(lines[start:end + 1])).strip()
    if not fragment:
        raise EmptyReplyError("reply contains no code")
    return fragment
