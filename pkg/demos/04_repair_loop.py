"""Drive the compile/execute repair loop with a scripted toolchain and a canned model."""
from cascadetest.assembly import assemble
from cascadetest.llm import ChatReply
from cascadetest.query import Query
from cascadetest.verification import RepairBudget, ScriptedToolchain, repair_loop

query = Query("Counter", "Counter(int start)", "int add(int delta)")
candidate = assemble("Counter c = new Counter(1);\nc.addd(2);", "assertEquals(3, c.get());", query)


class CannedModel:
    def complete(self, request):
        print(">> model asked:", request.messages[-1][1].splitlines()[0][:70], "...")
        return ChatReply("```java\nCounter c = new Counter(1);\nc.add(2);\nassertEquals(3, c.get());\n```")


# first compile fails, the repaired version compiles but fails once at runtime, then passes
toolchain = ScriptedToolchain(["error: cannot find symbol addd", None, None],
                              ["AssertionError: expected:<3> but was:<1>", None])
outcome = repair_loop(candidate, query, RepairBudget(3, 2), CannedModel(), toolchain)

print(f"\nstatus={outcome.status.value} compile_attempts={outcome.compile_attempts} "
      f"exec_attempts={outcome.exec_attempts}")
for entry in outcome.transcript:
    print(f"  rev {entry.revision} {entry.phase:8} {entry.error_text or 'ok'}")
print()
print(outcome.final_candidate.source_file)
