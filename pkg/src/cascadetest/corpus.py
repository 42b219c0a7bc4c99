"""Mining demonstration pools from a Java project's human-written tests.

A test method is split into a *prefix* (setup and the focal call) and an
*oracle* (the checking statements).  Each split instance produces one
:class:`PrefixDemo` and one :class:`OracleDemo`.
"""
from __future__ import annotations

import enum
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, Union

from tree_sitter import Node

from . import java
from .errors import (
    InvalidIdentifier,
    NoOracleFound,
    ParseError,
    PoolFormatError,
    ProjectLayoutError,
)
from .query import Query

log = logging.getLogger(__name__)

PLACEHOLDER = "<OraclePlaceHolder>"

ASSERTION_VOCABULARY = frozenset({
    "assertEquals", "assertArrayEquals", "assertTrue", "assertFalse", "assertNull",
    "assertNotNull", "assertNotEquals", "assertSame", "assertNotSame", "assertThat", "fail",
})
EXCEPTION_VOCABULARY = frozenset({"assertThrows"})
# Receivers under which the vocabulary is recognised, besides bare calls.
ASSERTION_OWNERS = frozenset({"Assert", "Assertions", "MatcherAssert", "TestCase", "Truth"})

TEST_SUFFIXES = ("Test", "Tests", "TestCase")


class OracleKind(str, enum.Enum):
    ASSERTION = "assertion"
    EXPECTED_EXCEPTION = "expected_exception"


@dataclass(frozen=True)
class JavaUnitRef:
    file_path: str
    class_name: str
    method_name: str
    method_signature: str
    source_text: str
    constructor_signatures: tuple[str, ...] = ()


@dataclass(frozen=True)
class PrefixDemo:
    focal_class: str
    constructor_params: str
    focal_method_signature: str
    test_name: str
    test_prefix: str

    kind = "prefix"

    def to_record(self) -> dict:
        return {"kind": "prefix", **asdict(self)}


@dataclass(frozen=True)
class OracleDemo:
    focal_method_signature: str
    test_body_with_placeholder: str
    test_oracle: str
    oracle_kind: OracleKind
    test_name: str
    # Not one of the three prompt parts; kept so the leak-exclusion rule
    # (class name AND signature) can be applied to the oracle pool too.
    focal_class: str = ""

    kind = "oracle"

    def to_record(self) -> dict:
        rec = {
            "kind": "oracle",
            "focal_method_signature": self.focal_method_signature,
            "test_body_with_placeholder": self.test_body_with_placeholder,
            "test_oracle": self.test_oracle,
            "oracle_kind": self.oracle_kind.value,
            "test_name": self.test_name,
        }
        if self.focal_class:
            rec["focal_class"] = self.focal_class
        return rec

    @property
    def full_body(self) -> str:
        return self.test_body_with_placeholder.replace(PLACEHOLDER, self.test_oracle)


Demo = Union[PrefixDemo, OracleDemo]


@dataclass(frozen=True)
class DemoPool:
    kind: str
    entries: tuple = ()
    project_tag: str = ""

    def __post_init__(self):
        if self.kind not in ("prefix", "oracle"):
            raise PoolFormatError(f"unknown pool kind {self.kind!r}")
        bad = [e for e in self.entries if e.kind != self.kind]
        if bad:
            raise PoolFormatError(f"{self.kind} pool holds a {bad[0].kind} demo")
        object.__setattr__(self, "entries", tuple(_dedup(self.entries)))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _dedup(entries: Iterable[Demo]) -> list[Demo]:
    seen, out = set(), []
    for e in entries:
        key = _dump(e)
        if key not in seen:
            seen.add(key)
            out.append(e)
    return out


def _dump(demo: Demo) -> str:
    return json.dumps(demo.to_record(), ensure_ascii=False)


# ---------------------------------------------------------------------------
# naming patterns


def derive_test_class_name(class_name: str) -> str:
    """``JsonReader`` -> ``JsonReaderTest``."""
    return test_class_name_candidates(class_name)[0]


def test_class_name_candidates(class_name: str) -> list[str]:
    if not java.is_identifier(class_name):
        raise InvalidIdentifier(f"not a Java identifier: {class_name!r}")
    return [class_name + s for s in TEST_SUFFIXES] + ["Test" + class_name]


test_class_name_candidates.__test__ = False


def focal_class_candidates(test_class_name: str) -> list[str]:
    """Inverse of the naming patterns: class names a test class may be testing."""
    out = []
    for s in TEST_SUFFIXES:
        if test_class_name.endswith(s) and len(test_class_name) > len(s):
            out.append(test_class_name[: -len(s)])
    if test_class_name.startswith("Test") and len(test_class_name) > 4:
        out.append(test_class_name[4:])
    return out


# ---------------------------------------------------------------------------
# statement classification


class StatementClassifier:
    """Decides whether a statement is part of the prefix or an oracle.

    Returns ``None`` for prefix statements and an :class:`OracleKind` otherwise.
    """

    def __init__(self, assertion_vocabulary=ASSERTION_VOCABULARY,
                 exception_vocabulary=EXCEPTION_VOCABULARY, owners=ASSERTION_OWNERS):
        self.assertion_vocabulary = frozenset(assertion_vocabulary)
        self.exception_vocabulary = frozenset(exception_vocabulary)
        self.owners = frozenset(owners)

    def __call__(self, stmt: str) -> OracleKind | None:
        return self.classify_node(java.parse_statement(stmt))

    def classify_node(self, node: Node) -> OracleKind | None:
        if self.is_try_fail(node):
            return OracleKind.EXPECTED_EXCEPTION
        calls = [n for n in java.walk(node) if n.type == "method_invocation" and self._owned(n)]
        names = {java.invocation_name(n) for n in calls}
        if names & self.exception_vocabulary:
            return OracleKind.EXPECTED_EXCEPTION
        if names & self.assertion_vocabulary:
            return OracleKind.ASSERTION
        return None

    def _owned(self, call: Node) -> bool:
        obj = java.invocation_object(call)
        return obj is None or obj.rsplit(".", 1)[-1] in self.owners

    def is_fail_call(self, node: Node) -> bool:
        if node.type != "expression_statement" or not node.named_children:
            return False
        call = node.named_children[0]
        return (call.type == "method_invocation" and java.invocation_name(call) == "fail"
                and self._owned(call))

    def is_try_fail(self, node: Node) -> bool:
        if node.type not in ("try_statement", "try_with_resources_statement"):
            return False
        if not any(c.type == "catch_clause" for c in node.named_children):
            return False
        body = java.block_statements(node.child_by_field_name("body"))
        return bool(body) and self.is_fail_call(body[-1])

    def try_prefix(self, node: Node) -> list[Node]:
        """Statements of a try/fail oracle's try body, minus the trailing ``fail``."""
        body = java.block_statements(node.child_by_field_name("body"))
        return [s for s in body[:-1] if self.classify_node(s) is None]


DEFAULT_CLASSIFIER = StatementClassifier()


def classify_statement(stmt: str) -> OracleKind | None:
    """Classify one complete Java statement.

    >>> classify_statement("assertEquals(3, result);")
    <OracleKind.ASSERTION: 'assertion'>
    >>> classify_statement("int x = 5;") is None
    True
    """
    return DEFAULT_CLASSIFIER(stmt)


# ---------------------------------------------------------------------------
# splitting


class SplitInstance(NamedTuple):
    test_prefix: str
    test_oracle: str
    kind: OracleKind
    body_with_placeholder: str


def _method_body(source_text: str) -> Node:
    tree = java.parse("class __Wrap__ {\n" + source_text + "\n}")
    if tree.root_node.has_error:
        raise ParseError("test method does not parse")
    cls = tree.root_node.named_children[0]
    methods = java.method_nodes(cls)
    if len(methods) != 1 or methods[0].child_by_field_name("body") is None:
        raise ParseError("expected a single test method with a body")
    return methods[0].child_by_field_name("body")


def split_unit_test(test_method: JavaUnitRef,
                    classifier: StatementClassifier = DEFAULT_CLASSIFIER) -> list[SplitInstance]:
    """Split a test method into one (prefix, oracle) instance per oracle kind present.

    Within one kind the oracle is the contiguous run of that kind starting at
    its first occurrence; the prefix is every non-oracle statement before it.
    For a try/``fail`` oracle the statements inside the try body are appended
    to the prefix.
    """
    stmts = java.block_statements(_method_body(test_method.source_text))
    kinds = [classifier.classify_node(s) for s in stmts]
    present = list(dict.fromkeys(k for k in kinds if k is not None))
    if not present:
        raise NoOracleFound(f"{test_method.class_name}.{test_method.method_name} has no oracle")

    out = []
    for kind in present:
        kept = [(s, k) for s, k in zip(stmts, kinds) if k is None or k == kind]
        first = next(i for i, (_, k) in enumerate(kept) if k == kind)
        end = first
        while end < len(kept) and kept[end][1] == kind:
            end += 1
        before = [java.statement_text(s) for s, _ in kept[:first]]
        run = [s for s, _ in kept[first:end]]
        prefix = list(before)
        if kind is OracleKind.EXPECTED_EXCEPTION:
            for s in run:
                if classifier.is_try_fail(s):
                    prefix.extend(java.statement_text(p) for p in classifier.try_prefix(s))
        out.append(SplitInstance(
            test_prefix="\n".join(prefix),
            test_oracle="\n".join(java.statement_text(s) for s in run),
            kind=kind,
            body_with_placeholder="\n".join(before + [PLACEHOLDER]),
        ))
    return out


# ---------------------------------------------------------------------------
# project scanning


@dataclass
class _SourceFile:
    path: Path
    classes: list = field(default_factory=list)


def _scan(paths: Sequence[Path], jobs: int) -> list[_SourceFile]:
    def load(p: Path) -> _SourceFile:
        try:
            src = p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping %s: %s", p, exc)
            return _SourceFile(p)
        tree = java.parse(src)
        if tree.root_node.has_error:
            log.warning("skipping %s: parse error", p)
            return _SourceFile(p)
        return _SourceFile(p, java.top_level_classes(src))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(load, paths))
    return [load(p) for p in paths]


def _java_files(root: Path) -> list[Path]:
    return sorted(root.rglob("*.java"), key=lambda p: p.as_posix())


def _is_test_method(m: java.MethodDecl, junit3: bool) -> bool:
    if m.is_constructor:
        return False
    if "Test" in m.annotations:
        return True
    return junit3 and m.name.startswith("test") and m.arity == 0 and "public" in m.modifiers


def match_focal_method(test_name: str, methods: Sequence[java.MethodDecl]) -> java.MethodDecl | None:
    """Pick the focal method a test is named after.

    Leading ``test``/``should`` is stripped and each method name is matched
    case-insensitively as a substring of what remains; the longest name wins,
    then declaration order.
    """
    stem = test_name
    for p in ("test", "should"):
        if stem.lower().startswith(p):
            stem = stem[len(p):]
            break
    stem = stem.lstrip("_").lower()
    if not stem:
        return None
    best = None
    for m in methods:
        if m.is_constructor or m.name.lower() not in stem:
            continue
        if best is None or len(m.name) > len(best.name):
            best = m
    return best


def _resolve_focal_class(test_cls: java.ClassDecl, index: dict) -> java.ClassDecl | None:
    found = []
    for name in focal_class_candidates(test_cls.name):
        found.extend(index.get(name, []))
    if not found:
        return None
    same_pkg = [c for c in found if c[1].package == test_cls.package]
    pool = same_pkg or found
    pool.sort(key=lambda c: (c[1].qualified_name, c[0].as_posix()))
    if len(pool) > 1:
        log.info("%s maps to %d candidate classes; taking %s", test_cls.name, len(pool),
                 pool[0][1].qualified_name)
    return pool[0][1]


def iter_test_units(project_root, main_dir="src/main", test_dir="src/test", jobs: int = 1):
    """Yield ``(focal_ref, test_ref)`` pairs for every resolvable test method."""
    root = Path(project_root)
    main, test = root / main_dir, root / test_dir
    for d in (main, test):
        if not d.is_dir():
            raise ProjectLayoutError(f"missing directory: {d}")

    index: dict[str, list] = {}
    for sf in _scan(_java_files(main), jobs):
        for cls in sf.classes:
            index.setdefault(cls.name, []).append((sf.path, cls))

    for sf in _scan(_java_files(test), jobs):
        for test_cls in sf.classes:
            focal_cls = _resolve_focal_class(test_cls, index)
            if focal_cls is None:
                log.info("no class under test for %s (%s)", test_cls.name, sf.path)
                continue
            junit3 = (test_cls.superclass or "").endswith("TestCase")
            ctor_sigs = tuple(focal_cls.constructor_signatures())
            for m in test_cls.methods:
                if not _is_test_method(m, junit3):
                    continue
                focal = match_focal_method(m.name, focal_cls.methods)
                if focal is None:
                    log.info("no focal method for %s.%s", test_cls.name, m.name)
                    continue
                focal_ref = JavaUnitRef(
                    file_path=focal_cls_path(index, focal_cls), class_name=focal_cls.name,
                    method_name=focal.name, method_signature=focal.signature,
                    source_text=focal.source_text, constructor_signatures=ctor_sigs)
                test_ref = JavaUnitRef(
                    file_path=sf.path.relative_to(root).as_posix(), class_name=test_cls.name,
                    method_name=m.name, method_signature=m.signature, source_text=m.source_text)
                yield focal_ref, test_ref


def focal_cls_path(index: dict, cls: java.ClassDecl) -> str:
    for path, c in index.get(cls.name, []):
        if c is cls:
            return path.as_posix()
    return ""


def build_demo_pools(project_root, main_dir="src/main", test_dir="src/test", project_tag=None,
                     classifier: StatementClassifier = DEFAULT_CLASSIFIER,
                     jobs: int = 1) -> tuple[DemoPool, DemoPool]:
    """Mine the prefix and oracle demo pools from a project's tests."""
    tag = project_tag if project_tag is not None else Path(project_root).resolve().name
    prefixes, oracles = [], []
    for focal, test in iter_test_units(project_root, main_dir, test_dir, jobs):
        try:
            instances = split_unit_test(test, classifier)
        except NoOracleFound:
            log.info("skipping %s.%s: no oracle", test.class_name, test.method_name)
            continue
        except ParseError as exc:
            log.warning("skipping %s.%s: %s", test.class_name, test.method_name, exc)
            continue
        for inst in instances:
            if not inst.test_prefix.strip():
                log.info("skipping %s instance of %s.%s: empty prefix", inst.kind.value,
                         test.class_name, test.method_name)
                continue
            prefixes.append(PrefixDemo(
                focal_class=focal.class_name,
                constructor_params="\n".join(focal.constructor_signatures),
                focal_method_signature=focal.method_signature,
                test_name=test.method_name,
                test_prefix=inst.test_prefix,
            ))
            oracles.append(OracleDemo(
                focal_method_signature=focal.method_signature,
                test_body_with_placeholder=inst.body_with_placeholder,
                test_oracle=inst.test_oracle,
                oracle_kind=inst.kind,
                test_name=test.method_name,
                focal_class=focal.class_name,
            ))
    return DemoPool("prefix", tuple(prefixes), tag), DemoPool("oracle", tuple(oracles), tag)


def _norm(sig: str) -> str:
    return " ".join(sig.split())


def exclusion_filter(pool: DemoPool, query: Query) -> DemoPool:
    """Drop demos sharing BOTH the query's class name and focal signature."""
    sig = _norm(query.focal_method_signature)
    kept = tuple(e for e in pool.entries
                 if not (e.focal_class == query.class_name and _norm(e.focal_method_signature) == sig))
    return DemoPool(pool.kind, kept, pool.project_tag)


# ---------------------------------------------------------------------------
# pool files (JSON Lines)


def save_pool(pool: DemoPool, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in pool.entries:
            fh.write(_dump(e) + "\n")


def demo_from_record(rec: dict) -> Demo:
    kind = rec.get("kind")
    try:
        if kind == "prefix":
            return PrefixDemo(rec["focal_class"], rec["constructor_params"],
                              rec["focal_method_signature"], rec["test_name"], rec["test_prefix"])
        if kind == "oracle":
            return OracleDemo(rec["focal_method_signature"], rec["test_body_with_placeholder"],
                              rec["test_oracle"], OracleKind(rec["oracle_kind"]), rec["test_name"],
                              rec.get("focal_class", ""))
    except (KeyError, ValueError) as exc:
        raise PoolFormatError(f"bad {kind} demo: {exc}") from exc
    raise PoolFormatError(f"unknown demo kind {kind!r}")


def load_pool(path, kind: str | None = None, project_tag: str | None = None) -> DemoPool:
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolFormatError(f"{path}:{lineno}: {exc}") from exc
            try:
                entries.append(demo_from_record(rec))
            except PoolFormatError as exc:
                raise PoolFormatError(f"{path}:{lineno}: {exc}") from exc
    if kind is None:
        kind = entries[0].kind if entries else ("oracle" if "oracle" in path.name else "prefix")
    tag = project_tag if project_tag is not None else path.parent.name
    return DemoPool(kind, tuple(entries), tag)


def write_pools(prefix_pool: DemoPool, oracle_pool: DemoPool, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    p, o = out / "prefix_pool.jsonl", out / "oracle_pool.jsonl"
    save_pool(prefix_pool, p)
    save_pool(oracle_pool, o)
    return p, o

