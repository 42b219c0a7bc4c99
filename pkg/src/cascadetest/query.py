from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from . import java
from .errors import IncompleteQuery, ParseError

REQUIRED_FIELDS = ("class_name", "constructor_signature", "focal_method_signature")


@dataclass(frozen=True)
class Query:
    """One focal method to generate a test for."""

    class_name: str
    constructor_signature: str
    focal_method_signature: str
    focal_source: str = ""
    project: str = ""
    id: str = ""

    @property
    def focal_method_name(self) -> str:
        return focal_name_from_signature(self.focal_method_signature)

    @property
    def focal_key(self) -> str:
        """Identity of the focal method across outcomes (used by coverage)."""
        return f"{self.project}:{self.class_name}#{self.focal_method_signature}"

    @property
    def package(self) -> str:
        if not self.focal_source:
            return ""
        return java.package_of(java.parse(self.focal_source).root_node)

    def check_complete(self) -> None:
        missing = [f for f in REQUIRED_FIELDS if not getattr(self, f).strip()]
        if missing:
            raise IncompleteQuery(f"query {self.id or self.class_name!r} missing {', '.join(missing)}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict, default_id: str = "") -> "Query":
        return cls(
            class_name=d.get("class_name", ""),
            constructor_signature=d.get("constructor_signature", ""),
            focal_method_signature=d.get("focal_method_signature", ""),
            focal_source=d.get("focal_source", ""),
            project=d.get("project", ""),
            id=str(d.get("id") or default_id),
        )


def focal_name_from_signature(signature: str) -> str:
    head = signature.split("(", 1)[0].split()
    if "(" not in signature or not head or not java.is_identifier(head[-1]):
        raise ParseError(f"not a method signature: {signature!r}")
    return head[-1]


def load_queries(path) -> list[Query]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                out.append(Query.from_dict(json.loads(line), default_id=f"q{lineno:04d}"))
    return out


def test_method_name(focal_name: str) -> str:
    """``printRecord`` -> ``testPrintRecord``."""
    return "test" + focal_name[:1].upper() + focal_name[1:]


test_method_name.__test__ = False  # keep pytest from collecting it when imported
