"""Random fixtures shared by the unit and acceptance suites."""
import random

from cascadetest.corpus import PLACEHOLDER, DemoPool, OracleDemo, OracleKind, PrefixDemo
from cascadetest.query import Query

NOUNS = ["Parser", "Buffer", "Reader", "Matrix", "Token", "Queue", "Graph", "Record", "Stream", "Cache"]
VERBS = ["read", "parse", "push", "merge", "split", "flush", "count", "close", "open", "scan", "sort"]
TYPES = ["int", "String", "boolean", "long", "double", "List<String>"]


def random_signature(r: random.Random) -> str:
    params = ", ".join(f"{r.choice(TYPES)} a{i}" for i in range(r.randint(0, 3)))
    return f"{r.choice(TYPES + ['void'])} {r.choice(VERBS)}{r.choice(NOUNS)}({params})"


def random_prefix_pool(r: random.Random, n: int) -> DemoPool:
    entries = []
    for i in range(n):
        cls = r.choice(NOUNS)
        sig = random_signature(r)
        stmts = [f"{cls} obj = new {cls}({r.randint(0, 9)});"]
        stmts += [f"obj.{r.choice(VERBS)}({r.randint(0, 99)});" for _ in range(r.randint(0, 3))]
        entries.append(PrefixDemo(cls, f"{cls}(int seed)", sig, f"test{i}", "\n".join(stmts)))
    return DemoPool("prefix", tuple(entries), "rand")


def random_oracle_pool(r: random.Random, n: int) -> DemoPool:
    entries = []
    for i in range(n):
        cls = r.choice(NOUNS)
        body = f"{cls} obj = new {cls}();\nint v = obj.{r.choice(VERBS)}();\n{PLACEHOLDER}"
        entries.append(OracleDemo(random_signature(r), body, f"assertEquals({r.randint(0, 50)}, v);",
                                  OracleKind.ASSERTION, f"test{i}", cls))
    return DemoPool("oracle", tuple(entries), "rand")


def query_for(demo) -> Query:
    return Query(demo.focal_class, f"{demo.focal_class}()", demo.focal_method_signature)


def random_query(r: random.Random) -> Query:
    cls = r.choice(NOUNS)
    return Query(cls, f"{cls}(int seed)", random_signature(r))
