"""Mine prefix and oracle demo pools from the small Java project under tests/fixtures."""
from pathlib import Path

from cascadetest.corpus import build_demo_pools

ROOT = Path(__file__).resolve().parents[1]
project = ROOT / "tests" / "fixtures" / "project"

prefix, oracle = build_demo_pools(project)
print(f"{len(prefix.entries)} prefix demos, {len(oracle.entries)} oracle demos\n")

# one test method becomes one prefix demo and one oracle demo
p, o = prefix.entries[0], oracle.entries[0]
print(f"{p.focal_class}: {p.focal_method_signature}  ({p.test_name})")
print("prefix:\n  " + p.test_prefix.replace("\n", "\n  "))
print(f"oracle ({o.oracle_kind.value}):\n  " + o.test_oracle.replace("\n", "\n  "))
