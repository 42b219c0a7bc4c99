"""End-to-end generation: select demos, prompt, assemble, verify."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import (
    JUNIT_IMPORTS,
    ClasspathIndex,
    CandidateTest,
    _class_source,
    assemble,
    assemble_body,
    build_classpath_index,
)
from .config import RunConfig
from .corpus import derive_test_class_name, load_pool
from .errors import AssemblyParseError, EmptyPoolError, EmptyReplyError, ParseError, PlaceholderCountError
from .llm import Backend, ChatOptions, make_backend
from .prompting import (
    GenerationMode,
    InstructionVariant,
    PromptBundle,
    PromptRenderer,
    PromptTemplates,
    enforce_token_budget,
    parse_llm_reply,
)
from .query import Query, test_method_name
from .selection import PoolIndex, SelectedDemos, SelectionStrategy, Strategy, make_embedder, select_demos
from .verification import (
    RepairBudget,
    RepairContext,
    Status,
    Toolchain,
    VerificationOutcome,
    invokes_focal,
    make_toolchain,
    repair_loop,
)

log = logging.getLogger(__name__)


@dataclass
class Pipeline:
    prefix_index: PoolIndex
    oracle_index: PoolIndex
    llm: Backend
    toolchain: Toolchain
    mode: GenerationMode = GenerationMode.CASCADED
    strategy: Strategy = Strategy.RANDOM
    variant: InstructionVariant = InstructionVariant.WELL_CRAFTED
    shots: int = 5
    token_budget: int = 4096
    budget: RepairBudget = field(default_factory=RepairBudget)
    seed: int = 0
    junit: str = "4"
    carry_history: bool = False
    options: ChatOptions = field(default_factory=ChatOptions)
    renderer: PromptRenderer = field(default_factory=PromptRenderer)
    index: ClasspathIndex | None = None
    workspace_root: Path = Path("workspace")

    @classmethod
    def from_config(cls, cfg: RunConfig, llm: Backend | None = None,
                    toolchain: Toolchain | None = None) -> "Pipeline":
        embedder = make_embedder(cfg.embedding)
        prefix_pool = load_pool(cfg.prefix_pool, kind="prefix")
        oracle_pool = load_pool(cfg.oracle_pool, kind="oracle")
        index = None
        if cfg.project_root:
            roots = [p for p in (Path(cfg.project_root) / "src" / "main",) if p.is_dir()]
            index = build_classpath_index(*roots)
        llm_cfg = cfg.llm
        return cls(
            prefix_index=PoolIndex(prefix_pool, embedder),
            oracle_index=PoolIndex(oracle_pool, embedder),
            llm=llm if llm is not None else make_backend(llm_cfg),
            toolchain=toolchain if toolchain is not None else make_toolchain(cfg.toolchain),
            mode=cfg.mode, strategy=cfg.strategy, variant=cfg.variant, shots=cfg.shots,
            token_budget=cfg.token_budget, budget=cfg.budget, seed=cfg.seed, junit=cfg.junit,
            carry_history=cfg.carry_history,
            options=ChatOptions(llm_cfg.get("model_id", "gpt-3.5-turbo"),
                                int(llm_cfg.get("max_output_tokens", 1024)),
                                float(llm_cfg.get("temperature", 0.0))),
            renderer=PromptRenderer(PromptTemplates.from_overrides(cfg.templates)),
            index=index,
            workspace_root=Path(cfg.workspace_root),
        )

    # -- helpers -----------------------------------------------------------

    def _select(self, query: Query, index: PoolIndex, rng, generated_prefix=None) -> SelectedDemos:
        strategy = SelectionStrategy(self.strategy, self.seed)
        try:
            return select_demos(query, index, self.shots, strategy, generated_prefix=generated_prefix, rng=rng)
        except EmptyPoolError:
            log.info("query %s: no demos available, prompting zero-shot", query.id)
            return SelectedDemos((), (), strategy)

    def _ask(self, bundle: PromptBundle, stages: list, history: Sequence[dict] = ()) -> tuple[str, list[dict]]:
        bundle = enforce_token_budget(bundle, self.token_budget, self.renderer.tokenizer)
        messages = bundle.messages()
        if history:
            messages = list(history) + messages[1:]
        request = self.options.request(messages)
        reply = self.llm.complete(request)
        stages.append({"stage": bundle.stage, "request_hash": request.hash(),
                       "demos": len(bundle.demo_texts), "tokens": bundle.token_count})
        convo = messages + [{"role": "assistant", "content": reply.content}]
        return parse_llm_reply(reply.content), convo

    def _raw_candidate(self, query: Query, statements: Sequence[str], prefix: str, oracle: str) -> CandidateTest:
        """A candidate for fragments that do not parse; the compile loop gets to fix it."""
        cls_name = derive_test_class_name(query.class_name)
        method = test_method_name(query.focal_method_name)
        imports = tuple(JUNIT_IMPORTS[self.junit])
        src = _class_source(query.package, cls_name, method, statements, imports)
        return CandidateTest(query.id, cls_name, method, prefix, oracle, src, imports, 0, query.package)

    # -- one query -----------------------------------------------------------

    def run_query(self, query: Query, position: int = 0) -> VerificationOutcome:
        stages: list[dict] = []
        rng_prefix = np.random.default_rng([self.seed, position, 0])
        rng_oracle = np.random.default_rng([self.seed, position, 1])
        try:
            if self.mode is GenerationMode.CASCADED:
                demos = self._select(query, self.prefix_index, rng_prefix)
                prefix, convo = self._ask(self.renderer.render_prefix_prompt(query, demos, self.variant), stages)
                demos = self._select(query, self.oracle_index, rng_oracle, generated_prefix=prefix)
                bundle = self.renderer.render_oracle_prompt(query, prefix, demos, self.variant)
                oracle, _ = self._ask(bundle, stages, convo if self.carry_history else ())
                try:
                    cand = assemble(prefix, oracle, query, self.junit, self.index)
                except (AssemblyParseError, PlaceholderCountError, ParseError) as exc:
                    log.info("query %s: %s; verifying raw candidate", query.id, exc)
                    cand = self._raw_candidate(query, [prefix, oracle], prefix, oracle)
            else:
                demos = self._select(query, self.oracle_index, rng_prefix)
                body, _ = self._ask(self.renderer.render_direct_prompt(query, demos, self.variant), stages)
                try:
                    cand = assemble_body(body, query, self.junit, self.index)
                except (AssemblyParseError, ParseError) as exc:
                    log.info("query %s: %s; verifying raw candidate", query.id, exc)
                    cand = self._raw_candidate(query, [body], body, "")
        except EmptyReplyError as exc:
            return VerificationOutcome(Status.ABORTED_EMPTY_REPLY, 0, 0, None, [], False,
                                       query.id, query.focal_key, stages, str(exc))

        ctx = RepairContext(self.llm, self.options, self.renderer, self.token_budget, self.junit,
                            self.index, stages)
        workspace = self.workspace_root / _safe(query.id or f"q{position:04d}")
        outcome = repair_loop(cand, query, self.budget, ctx, self.toolchain, workspace)
        if outcome.status is Status.PASSED and outcome.final_candidate is not None:
            outcome.focal_invoked = invokes_focal(outcome.final_candidate, query)
        return outcome

    def run(self, queries: Sequence[Query], jobs: int = 1) -> list[VerificationOutcome]:
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as ex:
                return list(ex.map(self.run_query, queries, range(len(queries))))
        return [self.run_query(q, i) for i, q in enumerate(queries)]


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def write_outcomes(outcomes: Sequence[VerificationOutcome], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for o in outcomes:
            fh.write(json.dumps(o.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")


def read_outcomes(path) -> list[VerificationOutcome]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(VerificationOutcome.from_dict(json.loads(line)))
    return out
