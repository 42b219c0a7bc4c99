"""Cascaded prefix/oracle unit test generation for Java projects.

Pools of demonstrations are mined from existing JUnit tests, an LLM is asked
first for a test prefix and then for an oracle, and the assembled test is
compiled and executed with bounded feedback-driven repair.
"""

__version__ = "0.1.0"

from .corpus import build_demo_pools, exclusion_filter, load_pool, split_unit_test  # noqa: E402
from .metrics import accuracy, avg_repair_attempts, focal_method_coverage  # noqa: E402
from .query import Query  # noqa: E402
from .selection import SelectionStrategy, Strategy, select_demos  # noqa: E402
from .verification import RepairBudget, Status, VerificationOutcome, repair_loop  # noqa: E402

__all__ = [
    "Query", "RepairBudget", "SelectionStrategy", "Status", "Strategy", "VerificationOutcome",
    "accuracy", "avg_repair_attempts", "build_demo_pools", "exclusion_filter", "focal_method_coverage",
    "load_pool", "repair_loop", "select_demos", "split_unit_test",
]
