"""Thin helpers over the tree-sitter Java grammar.

Everything that needs to look at Java structure goes through here so the
rest of the package never touches byte offsets directly.
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

import tree_sitter_java
from tree_sitter import Language, Node, Parser, Tree

from .errors import ParseError

JAVA = Language(tree_sitter_java.language())

_local = threading.local()

_WRAP_HEAD = "class __Wrap__ { void __wrap__() {\n"
_WRAP_TAIL = "\n} }"

_IDENT = re.compile(r"^[A-Za-z_$][A-Za-z0-9_$]*$")
_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null""".split()
)


def is_identifier(name: str) -> bool:
    return bool(name) and bool(_IDENT.match(name)) and name not in _KEYWORDS


def _parser() -> Parser:
    # Parser objects are not thread-safe; keep one per thread.
    p = getattr(_local, "parser", None)
    if p is None:
        p = _local.parser = Parser(JAVA)
    return p


def parse(source: str) -> Tree:
    return _parser().parse(source.encode("utf-8"))


def text(node: Node) -> str:
    return node.text.decode("utf-8")


def statement_text(node: Node, source: bytes | None = None) -> str:
    """Source of ``node`` with continuation lines dedented to its start column."""
    raw = text(node)
    lines = raw.split("\n")
    if len(lines) == 1:
        return raw.strip()
    col = node.start_point[1]
    out = [lines[0]]
    for line in lines[1:]:
        strip = min(col, len(line) - len(line.lstrip(" \t")))
        out.append(line[strip:].rstrip())
    return "\n".join(out).strip()


def walk(node: Node):
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def parse_compilation_unit(source: str) -> Tree:
    tree = parse(source)
    if tree.root_node.has_error:
        raise ParseError(_first_error(tree.root_node))
    return tree


def _first_error(root: Node) -> str:
    for n in walk(root):
        if n.type == "ERROR" or n.is_missing:
            row, col = n.start_point
            return f"syntax error near line {row + 1}, column {col + 1}: {text(n)[:40]!r}"
    return "syntax error"


def parse_block_statements(code: str) -> list[Node]:
    """Parse a sequence of Java statements; returns the top-level statement nodes."""
    tree = parse(_WRAP_HEAD + code + _WRAP_TAIL)
    root = tree.root_node
    if root.has_error:
        raise ParseError(f"cannot parse statements: {code[:60]!r}")
    cls = root.named_children[0]
    method = cls.child_by_field_name("body").named_children[0]
    block = method.child_by_field_name("body")
    # the tree must stay alive while nodes are used; nodes keep a reference
    return [c for c in block.named_children if not c.type.endswith("comment")]


def parse_statement(stmt: str) -> Node:
    nodes = parse_block_statements(stmt)
    if len(nodes) != 1:
        raise ParseError(f"expected exactly one statement, found {len(nodes)}: {stmt[:60]!r}")
    return nodes[0]


def block_statements(block: Node) -> list[Node]:
    return [c for c in block.named_children if not c.type.endswith("comment")]


# ---------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class Parameter:
    type: str
    name: str
    varargs: bool = False


@dataclass(frozen=True)
class MethodDecl:
    name: str
    signature: str
    parameters: tuple[Parameter, ...]
    annotations: tuple[str, ...]
    modifiers: tuple[str, ...]
    source_text: str
    is_constructor: bool = False

    @property
    def arity(self) -> int:
        return len(self.parameters)

    @property
    def varargs(self) -> bool:
        return bool(self.parameters) and self.parameters[-1].varargs

    def accepts(self, n_args: int) -> bool:
        if self.varargs:
            return n_args >= self.arity - 1
        return n_args == self.arity


@dataclass(frozen=True)
class ClassDecl:
    name: str
    package: str
    superclass: str | None
    methods: tuple[MethodDecl, ...]
    constructors: tuple[MethodDecl, ...]
    imports: tuple[str, ...] = field(default=())
    source_text: str = ""

    @property
    def qualified_name(self) -> str:
        return f"{self.package}.{self.name}" if self.package else self.name

    def constructor_signatures(self) -> list[str]:
        if not self.constructors:
            return [f"{self.name}()"]
        return [c.signature for c in self.constructors]


def _squash(s: str) -> str:
    return " ".join(s.split())


def _params(node: Node) -> tuple[Parameter, ...]:
    out = []
    for p in node.named_children:
        if p.type == "formal_parameter":
            out.append(Parameter(_squash(text(p.child_by_field_name("type"))),
                                 text(p.child_by_field_name("name"))))
        elif p.type == "spread_parameter":
            typ = next(c for c in p.named_children if c.type not in ("modifiers", "variable_declarator"))
            decl = next(c for c in p.named_children if c.type == "variable_declarator")
            out.append(Parameter(_squash(text(typ)) + "...",
                                 text(decl.child_by_field_name("name")), varargs=True))
        elif p.type == "receiver_parameter":
            continue
    return tuple(out)


def _annotations_and_modifiers(node: Node) -> tuple[tuple[str, ...], tuple[str, ...]]:
    mods = next((c for c in node.children if c.type == "modifiers"), None)
    if mods is None:
        return (), ()
    annotations, modifiers = [], []
    for c in mods.children:
        if c.type in ("marker_annotation", "annotation"):
            annotations.append(text(c.child_by_field_name("name")).rsplit(".", 1)[-1])
        elif c.is_named or c.type.isalpha():
            modifiers.append(text(c))
    return tuple(annotations), tuple(modifiers)


def method_signature(node: Node) -> str:
    """``[<T>] ReturnType name(Type a, Type b)`` for a method or constructor node."""
    params = node.child_by_field_name("parameters")
    name = text(node.child_by_field_name("name"))
    plist = ", ".join(f"{p.type.removesuffix('...')}... {p.name}" if p.varargs else f"{p.type} {p.name}"
                      for p in _params(params))
    if node.type == "constructor_declaration":
        return f"{name}({plist})"
    tparams = node.child_by_field_name("type_parameters")
    rtype = _squash(text(node.child_by_field_name("type")))
    dims = node.child_by_field_name("dimensions")
    if dims is not None:
        rtype += text(dims)
    head = f"{_squash(text(tparams))} " if tparams is not None else ""
    return f"{head}{rtype} {name}({plist})"


def method_decl(node: Node) -> MethodDecl:
    annotations, modifiers = _annotations_and_modifiers(node)
    return MethodDecl(
        name=text(node.child_by_field_name("name")),
        signature=method_signature(node),
        parameters=_params(node.child_by_field_name("parameters")),
        annotations=annotations,
        modifiers=modifiers,
        source_text=statement_text(node),
        is_constructor=node.type == "constructor_declaration",
    )


def package_of(root: Node) -> str:
    for c in root.named_children:
        if c.type == "package_declaration":
            ident = next(n for n in c.named_children if n.type in ("scoped_identifier", "identifier"))
            return text(ident)
    return ""


def imports_of(root: Node) -> tuple[str, ...]:
    return tuple(_squash(text(c)) for c in root.named_children if c.type == "import_declaration")


_TYPE_DECLS = ("class_declaration", "enum_declaration", "record_declaration", "interface_declaration")


def top_level_classes(source: str) -> list[ClassDecl]:
    """Top-level type declarations in a compilation unit (parse errors are tolerated)."""
    tree = parse(source)
    root = tree.root_node
    pkg = package_of(root)
    imports = imports_of(root)
    out = []
    for c in root.named_children:
        if c.type not in _TYPE_DECLS:
            continue
        body = c.child_by_field_name("body")
        if body is None:
            continue
        members = list(body.named_children)
        if c.type == "enum_declaration":
            decls = next((m for m in members if m.type == "enum_body_declarations"), None)
            members = list(decls.named_children) if decls is not None else []
        methods = tuple(method_decl(m) for m in members
                        if m.type == "method_declaration" and m.child_by_field_name("name") is not None)
        ctors = tuple(method_decl(m) for m in members if m.type == "constructor_declaration")
        sup = c.child_by_field_name("superclass")
        out.append(ClassDecl(
            name=text(c.child_by_field_name("name")),
            package=pkg,
            superclass=_squash(text(sup)).removeprefix("extends ").strip() if sup is not None else None,
            methods=methods,
            constructors=ctors,
            imports=imports,
            source_text=source,
        ))
    return out


def method_nodes(class_node: Node) -> list[Node]:
    body = class_node.child_by_field_name("body")
    return [m for m in body.named_children if m.type == "method_declaration"] if body is not None else []


def invocation_name(node: Node) -> str:
    return text(node.child_by_field_name("name"))


def invocation_object(node: Node) -> str | None:
    obj = node.child_by_field_name("object")
    return text(obj) if obj is not None else None


def invocation_arity(node: Node) -> int:
    args = node.child_by_field_name("arguments")
    return len(args.named_children) if args is not None else 0
