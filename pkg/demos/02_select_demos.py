"""Pick demos for a query with each ordering strategy."""
from pathlib import Path

from cascadetest.corpus import build_demo_pools
from cascadetest.query import Query
from cascadetest.selection import SelectionStrategy, Strategy, select_demos

ROOT = Path(__file__).resolve().parents[1]
prefix, _ = build_demo_pools(ROOT / "tests" / "fixtures" / "project")

# The pool contains a test for BoundedStack.push, so that entry is excluded.
query = Query("BoundedStack", "BoundedStack(int capacity)", "void push(int x)")

for strategy in Strategy:
    sel = select_demos(query, prefix, 3, SelectionStrategy(strategy, seed=3))
    names = [f"{d.focal_class}.{d.test_name}" for d in sel.demos]
    sims = ", ".join(f"{s:.3f}" for s in sel.similarities)
    print(f"{strategy.value:15} {names}  [{sims}]")
