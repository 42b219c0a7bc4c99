"""Render the two cascaded prompts for one query and squeeze one into a tight budget."""
from pathlib import Path

from cascadetest.corpus import build_demo_pools
from cascadetest.prompting import enforce_token_budget, render_oracle_prompt, render_prefix_prompt
from cascadetest.query import Query
from cascadetest.selection import SelectionStrategy, Strategy, select_demos

ROOT = Path(__file__).resolve().parents[1]
project = ROOT / "tests" / "fixtures" / "project"
prefix_pool, oracle_pool = build_demo_pools(project)
source = (project / "src/main/java/org/demo/util/Counter.java").read_text()
query = Query("Counter", "Counter(int start)", "int add(int delta)", source, "demo")

strategy = SelectionStrategy(Strategy.DESCENDING)
first = render_prefix_prompt(query, select_demos(query, prefix_pool, 3, strategy))
print(first.rendered)
print(f"--- {first.token_count} tokens, {len(first.demo_texts)} demos\n")

# pretend the model answered the first prompt with this prefix
generated = "Counter counter = new Counter(2);\ncounter.add(5);"
second = render_oracle_prompt(query, generated,
                              select_demos(query, oracle_pool, 3, strategy, generated_prefix=generated))
print(second.target_block)

tight = enforce_token_budget(second, second.token_count - 1)
print(f"budget {second.token_count - 1}: kept {len(tight.demo_texts)} of {len(second.demo_texts)} demos, "
      f"{tight.token_count} tokens")
