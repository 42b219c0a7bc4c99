"""Turning generated fragments into a compilable JUnit test class."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from . import java
from .corpus import PLACEHOLDER, DEFAULT_CLASSIFIER, derive_test_class_name
from .errors import AssemblyParseError, ParseError, PlaceholderCountError
from .query import Query, test_method_name

log = logging.getLogger(__name__)

JUNIT_IMPORTS = {
    "4": ("import org.junit.Test;", "import static org.junit.Assert.*;"),
    "5": ("import org.junit.jupiter.api.Test;", "import static org.junit.jupiter.api.Assertions.*;"),
}

# Common JDK types outside java.lang, so everyday prefixes resolve without a
# project scan.  java.lang needs no import and is deliberately absent.
JDK_TYPES = (
    "java.io.BufferedReader", "java.io.ByteArrayInputStream", "java.io.ByteArrayOutputStream",
    "java.io.File", "java.io.FileReader", "java.io.FileWriter", "java.io.IOException",
    "java.io.InputStream", "java.io.OutputStream", "java.io.PrintStream", "java.io.Reader",
    "java.io.StringReader", "java.io.StringWriter", "java.io.Writer",
    "java.math.BigDecimal", "java.math.BigInteger",
    "java.nio.charset.StandardCharsets", "java.nio.file.Files", "java.nio.file.Path",
    "java.nio.file.Paths",
    "java.util.ArrayDeque", "java.util.ArrayList", "java.util.Arrays", "java.util.Collection",
    "java.util.Collections", "java.util.Date", "java.util.Deque", "java.util.HashMap",
    "java.util.HashSet", "java.util.Iterator", "java.util.LinkedHashMap", "java.util.LinkedList",
    "java.util.List", "java.util.Locale", "java.util.Map", "java.util.NoSuchElementException",
    "java.util.Objects", "java.util.Optional", "java.util.Set", "java.util.TreeMap",
    "java.util.TreeSet",
)


@dataclass(frozen=True)
class CandidateTest:
    query_ref: str
    test_class_name: str
    test_method_name: str
    prefix_text: str
    oracle_text: str
    source_file: str
    imports: tuple[str, ...]
    revision: int = 0
    package: str = ""

    @property
    def relative_path(self) -> Path:
        parts = self.package.split(".") if self.package else []
        return Path(*parts, f"{self.test_class_name}.java") if parts else Path(f"{self.test_class_name}.java")

    @property
    def qualified_class(self) -> str:
        return f"{self.package}.{self.test_class_name}" if self.package else self.test_class_name

    def to_dict(self) -> dict:
        return {
            "query_ref": self.query_ref, "test_class_name": self.test_class_name,
            "test_method_name": self.test_method_name, "prefix_text": self.prefix_text,
            "oracle_text": self.oracle_text, "source_file": self.source_file,
            "imports": list(self.imports), "revision": self.revision, "package": self.package,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateTest":
        return cls(d["query_ref"], d["test_class_name"], d["test_method_name"], d["prefix_text"],
                   d["oracle_text"], d["source_file"], tuple(d.get("imports", ())),
                   int(d.get("revision", 0)), d.get("package", ""))


# ---------------------------------------------------------------------------
# classpath index


class ClasspathIndex:
    """Simple type name -> fully-qualified candidates."""

    def __init__(self, mapping: Mapping[str, Sequence[str]] | None = None):
        self._map: dict[str, list[str]] = {}
        for name, fqns in (mapping or {}).items():
            for f in fqns:
                self.add(f, name)

    def add(self, fqn: str, simple: str | None = None) -> None:
        simple = simple or fqn.rsplit(".", 1)[-1]
        bucket = self._map.setdefault(simple, [])
        if fqn not in bucket:
            bucket.append(fqn)
            bucket.sort()

    def lookup(self, simple: str) -> str | None:
        hits = self._map.get(simple)
        return hits[0] if hits else None

    def __contains__(self, simple: str) -> bool:
        return simple in self._map

    def merged(self, other: "ClasspathIndex") -> "ClasspathIndex":
        out = ClasspathIndex()
        for idx in (self, other):
            for simple, fqns in idx._map.items():
                for f in fqns:
                    out.add(f, simple)
        return out

    @classmethod
    def jdk(cls) -> "ClasspathIndex":
        idx = cls()
        for f in JDK_TYPES:
            idx.add(f)
        return idx

    @classmethod
    def from_imports(cls, imports: Sequence[str]) -> "ClasspathIndex":
        idx = cls()
        for imp in imports:
            m = re.match(r"import\s+([\w.]+)\s*;", imp)
            if m and not m.group(1).endswith("*"):
                idx.add(m.group(1))
        return idx


def build_classpath_index(*source_roots, include_jdk: bool = True) -> ClasspathIndex:
    """Index every top-level type declared under the given source roots."""
    idx = ClasspathIndex.jdk() if include_jdk else ClasspathIndex()
    for root in source_roots:
        for path in sorted(Path(root).rglob("*.java")):
            try:
                classes = java.top_level_classes(path.read_text(encoding="utf-8"))
            except (OSError, UnicodeDecodeError):
                continue
            for c in classes:
                idx.add(c.qualified_name, c.name)
    return idx


# ---------------------------------------------------------------------------
# import fixing


def _used_type_names(root) -> set[str]:
    used = set()
    for n in java.walk(root):
        if n.type in ("import_declaration", "package_declaration"):
            continue
        parent = n.parent
        if n.type == "type_identifier":
            # only the leftmost segment of a qualified name can need an import
            if parent is not None and parent.type == "scoped_type_identifier" and parent.children[0] != n:
                continue
            if parent is not None and parent.type == "scoped_type_identifier" and _qualified_package(parent):
                continue
            used.add(java.text(n))
        elif n.type in ("marker_annotation", "annotation"):
            name = n.child_by_field_name("name")
            if name is not None and name.type == "identifier":
                used.add(java.text(name))
        elif n.type in ("method_invocation", "field_access"):
            obj = n.child_by_field_name("object")
            if obj is not None and obj.type == "identifier" and java.text(obj)[:1].isupper():
                used.add(java.text(obj))
    return used


def _qualified_package(scoped) -> bool:
    # ``java.io.File``: the leftmost segment is lower-case, i.e. a package
    first = scoped
    while first.type == "scoped_type_identifier":
        first = first.children[0]
    return java.text(first)[:1].islower()


def _declared_names(root) -> set[str]:
    out = set()
    for n in java.walk(root):
        if n.type in ("class_declaration", "interface_declaration", "enum_declaration",
                      "record_declaration", "type_parameter"):
            name = n.child_by_field_name("name") or next(
                (c for c in n.named_children if c.type in ("identifier", "type_identifier")), None)
            if name is not None:
                out.add(java.text(name))
        elif n.type in ("local_variable_declaration", "formal_parameter", "field_declaration",
                        "catch_formal_parameter", "lambda_expression", "enhanced_for_statement"):
            for d in java.walk(n):
                if d.type == "variable_declarator":
                    out.add(java.text(d.child_by_field_name("name")))
                elif d.type == "identifier" and d.parent is not None and d.parent.type in (
                        "formal_parameter", "catch_formal_parameter", "inferred_parameters"):
                    out.add(java.text(d))
    return out


def _import_key(imp: str) -> tuple[int, str]:
    return (1 if imp.startswith("import static") else 0, imp)


def _imported_simple_names(imports: Sequence[str]) -> tuple[set[str], set[str]]:
    names, wildcards = set(), set()
    for imp in imports:
        m = re.match(r"import\s+(static\s+)?([\w.]+?)(\.\*)?\s*;", imp)
        if not m:
            continue
        if m.group(3):
            wildcards.add(m.group(2))
        elif not m.group(1):
            names.add(m.group(2).rsplit(".", 1)[-1])
    return names, wildcards


def fix_imports(source: str, index: ClasspathIndex | None = None,
                extra_imports: Sequence[str] = ()) -> str:
    """Add imports for unresolved simple type names, dedupe, and sort the import block."""
    index = index if index is not None else ClasspathIndex.jdk()
    tree = java.parse(source)
    root = tree.root_node
    if root.has_error:
        raise ParseError("cannot fix imports of a source that does not parse")
    imports = [" ".join(java.text(c).split()) for c in root.named_children if c.type == "import_declaration"]
    imports.extend(extra_imports)
    names, wildcards = _imported_simple_names(imports)
    declared = _declared_names(root)
    own_package = java.package_of(root)
    for name in sorted(_used_type_names(root) - declared - names):
        fqn = index.lookup(name)
        if fqn is None:
            continue
        pkg = fqn.rsplit(".", 1)[0] if "." in fqn else ""
        if pkg in wildcards or pkg == own_package:
            continue
        imports.append(f"import {fqn};")
    imports = sorted(set(imports), key=_import_key)
    return _replace_header(source, root, imports)


def _replace_header(source: str, root, imports: Sequence[str]) -> str:
    data = source.encode("utf-8")
    pkg = next((c for c in root.named_children if c.type == "package_declaration"), None)
    header_nodes = [c for c in root.named_children if c.type in ("package_declaration", "import_declaration")]
    cut = max((c.end_byte for c in header_nodes), default=0)
    body = data[cut:].decode("utf-8").lstrip("\n")
    parts = []
    if pkg is not None:
        parts.append(" ".join(java.text(pkg).split()))
    plain = [i for i in imports if not i.startswith("import static")]
    static = [i for i in imports if i.startswith("import static")]
    if plain:
        parts.append("\n".join(plain))
    if static:
        parts.append("\n".join(static))
    head = "\n\n".join(parts)
    return (head + "\n\n" + body) if head else body


# ---------------------------------------------------------------------------
# assembling


def _check_statements(fragment: str, what: str) -> list[str]:
    try:
        nodes = java.parse_block_statements(fragment)
    except ParseError as exc:
        raise AssemblyParseError(f"{what} does not parse as Java statements: {exc}") from exc
    return [java.statement_text(n) for n in nodes]


def _indent(lines: Sequence[str], level: int = 2) -> str:
    pad = "    " * level
    return "\n".join("\n".join(pad + ln if ln else ln for ln in s.split("\n")) for s in lines)


def _class_source(package: str, class_name: str, method_name: str, statements: Sequence[str],
                  imports: Sequence[str]) -> str:
    head = f"package {package};\n\n" if package else ""
    return (head + "\n".join(imports) + "\n\n"
            f"public class {class_name} {{\n\n"
            f"    @Test\n"
            f"    public void {method_name}() throws Exception {{\n"
            f"{_indent(statements)}\n"
            f"    }}\n"
            f"}}\n")


def _query_index(query: Query, index: ClasspathIndex | None) -> ClasspathIndex:
    base = index if index is not None else ClasspathIndex.jdk()
    if query.focal_source:
        try:
            imports = java.imports_of(java.parse(query.focal_source).root_node)
        except Exception:  # pragma: no cover - tree-sitter never raises on parse
            imports = ()
        base = base.merged(ClasspathIndex.from_imports(imports))
    return base


def _build(prefix_stmts, oracle_stmts, query: Query, junit: str, index, revision: int = 0) -> CandidateTest:
    class_name = derive_test_class_name(query.class_name)
    method_name = test_method_name(query.focal_method_name)
    package = query.package
    junit_imports = JUNIT_IMPORTS[str(junit)]
    raw = _class_source(package, class_name, method_name, list(prefix_stmts) + list(oracle_stmts),
                        sorted(junit_imports, key=_import_key))
    source = fix_imports(raw, _query_index(query, index))
    imports = tuple(ln for ln in source.splitlines() if ln.startswith("import "))
    return CandidateTest(query.id, class_name, method_name, "\n".join(prefix_stmts),
                         "\n".join(oracle_stmts), source, imports, revision, package)


def assemble(prefix: str, oracle: str, query: Query, junit: str = "4",
             index: ClasspathIndex | None = None) -> CandidateTest:
    """Combine a generated prefix and oracle into a JUnit test class."""
    if not prefix.strip() or not oracle.strip():
        raise AssemblyParseError("both prefix and oracle must be non-empty")
    if PLACEHOLDER in oracle:
        raise PlaceholderCountError("oracle still contains the placeholder token")
    return _build(_check_statements(prefix, "prefix"), _check_statements(oracle, "oracle"),
                  query, junit, index)


def assemble_body(body: str, query: Query, junit: str = "4",
                  index: ClasspathIndex | None = None) -> CandidateTest:
    """Assemble a complete test body (direct generation), keeping statement order."""
    if not body.strip():
        raise AssemblyParseError("empty test body")
    stmts = _check_statements(_strip_method_wrapper(body), "test body")
    kinds = [DEFAULT_CLASSIFIER(s) for s in stmts]
    first = next((i for i, k in enumerate(kinds) if k is not None), len(stmts))
    return _build(stmts[:first], stmts[first:], query, junit, index)


_METHOD_HEAD = re.compile(r"^\s*(@\w+\s*)*(public\s+|protected\s+|private\s+)?void\s+\w+\s*\([^)]*\)"
                          r"(\s*throws\s+[\w.,\s]+)?\s*\{", re.S)


def _strip_method_wrapper(code: str) -> str:
    m = _METHOD_HEAD.match(code)
    if not m:
        return code
    inner = code[m.end():].rstrip()
    return inner[:-1] if inner.endswith("}") else inner


def substitute_placeholder(body_with_placeholder: str, oracle: str) -> str:
    n = body_with_placeholder.count(PLACEHOLDER)
    if n != 1:
        raise PlaceholderCountError(f"expected exactly one {PLACEHOLDER}, found {n}")
    merged = body_with_placeholder.replace(PLACEHOLDER, oracle)
    _check_statements(merged, "merged body")
    return merged


def revise(candidate: CandidateTest, code: str, query: Query, junit: str = "4",
           index: ClasspathIndex | None = None) -> CandidateTest:
    """New revision of ``candidate`` from a repair reply.

    A reply holding a whole class replaces the source (imports are re-fixed
    when it parses); a bare method or statement list is re-assembled.  Code
    that does not parse is kept verbatim so the compiler can report on it.
    """
    rev = candidate.revision + 1
    tree = java.parse(code)
    has_class = any(c.type == "class_declaration" for c in tree.root_node.named_children)
    if has_class:
        source = code.strip() + "\n"
        if not tree.root_node.has_error:
            if candidate.package and not java.package_of(tree.root_node):
                source = f"package {candidate.package};\n\n" + source
            source = fix_imports(source, _query_index(query, index),
                                 extra_imports=JUNIT_IMPORTS[str(junit)])
        imports = tuple(ln for ln in source.splitlines() if ln.startswith("import "))
        return replace(candidate, source_file=source, imports=imports, revision=rev)
    try:
        built = assemble_body(code, query, junit, index)
    except (AssemblyParseError, ParseError):
        return replace(candidate, source_file=code.strip() + "\n", revision=rev)
    return replace(built, revision=rev)


def write_candidate(candidate: CandidateTest, source_root) -> Path:
    path = Path(source_root) / candidate.relative_path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(candidate.source_file, encoding="utf-8")
    return path
