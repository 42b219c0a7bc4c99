"""Run the whole pipeline over ten queries with a replayed model, then score it."""
import tempfile
from pathlib import Path

from cascadetest.config import load_config
from cascadetest.metrics import build_report, render_report
from cascadetest.pipeline import Pipeline
from cascadetest.query import load_queries

E2E = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "e2e"

cfg = load_config(E2E / "config.yaml")
cfg.workspace_root = tempfile.mkdtemp(prefix="cascadetest-")
queries = load_queries(E2E / "queries.jsonl")

outcomes = Pipeline.from_config(cfg).run(queries)
for q, o in zip(queries, outcomes):
    print(f"{q.id}  {q.class_name + '.' + q.focal_method_name:24} {o.status.value:20} "
          f"repairs={o.compile_attempts}+{o.exec_attempts} correct={o.correct}")

print()
print(render_report(build_report(outcomes, {q.focal_key for q in queries}, "cascaded", "random", "well_crafted")))
