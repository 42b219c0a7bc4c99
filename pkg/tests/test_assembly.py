import pytest

from cascadetest import java
from cascadetest.assembly import (
    JUNIT_IMPORTS,
    CandidateTest,
    ClasspathIndex,
    assemble,
    assemble_body,
    build_classpath_index,
    fix_imports,
    revise,
    substitute_placeholder,
    write_candidate,
)
from cascadetest.corpus import PLACEHOLDER
from cascadetest.errors import AssemblyParseError, PlaceholderCountError
from cascadetest.query import Query

from conftest import PROJECT, focal_source

PRINTER = Query("CSVPrinter", "CSVPrinter(Appendable out)", "void printRecord(Object... values)",
                id="q-printer")


def test_assemble_names_follow_the_focal_method():
    c = assemble("CSVPrinter p = new CSVPrinter(new StringBuilder());", "p.printRecord(\"a\");\nassertTrue(true);",
                 PRINTER)
    assert c.test_class_name == "CSVPrinterTest"
    assert c.test_method_name == "testPrintRecord"
    assert c.revision == 0
    assert "import org.junit.Test;" in c.imports


def test_assemble_roundtrip_shape():
    c = assemble("int a = 1;\nint b = 2;", "assertEquals(3, a + b);", PRINTER)
    tree = java.parse(c.source_file)
    assert not tree.root_node.has_error
    classes = [n for n in tree.root_node.named_children if n.type == "class_declaration"]
    assert len(classes) == 1
    tests = [java.method_decl(m) for m in java.method_nodes(classes[0])]
    assert [m.name for m in tests if "Test" in m.annotations] == ["testPrintRecord"]
    src = c.source_file
    assert src.index("int a = 1;") < src.index("int b = 2;") < src.index("assertEquals(3, a + b);")


def test_assemble_adds_jdk_imports():
    c = assemble('File f = new File("x.txt");', "assertNotNull(f);", PRINTER)
    assert "import java.io.File;" in c.source_file


def test_assemble_rejects_placeholder_in_oracle():
    with pytest.raises(PlaceholderCountError):
        assemble("int a = 1;", PLACEHOLDER, PRINTER)


@pytest.mark.parametrize("prefix,oracle", [("", "assertTrue(true);"), ("int a = ;", "assertTrue(true);"),
                                           ("int a = 1;", "assertEquals(1, a")])
def test_assemble_rejects_bad_fragments(prefix, oracle):
    with pytest.raises(AssemblyParseError):
        assemble(prefix, oracle, PRINTER)


def test_package_mirrors_the_class_under_test():
    q = Query("Counter", "Counter(int start)", "void reset()", focal_source("Counter"), "demo", "q1")
    c = assemble("Counter c = new Counter(1);\nc.reset();", "assertEquals(0, c.get());", q)
    assert c.source_file.startswith("package org.demo.util;\n")
    assert c.qualified_class == "org.demo.util.CounterTest"
    assert str(c.relative_path) == "org/demo/util/CounterTest.java"
    # same-package classes need no import
    assert "import org.demo.util.Counter;" not in c.source_file


def test_junit5_imports():
    c = assemble("int a = 1;", "assertEquals(1, a);", PRINTER, junit="5")
    assert "import org.junit.jupiter.api.Test;" in c.source_file
    assert set(JUNIT_IMPORTS["5"]) <= set(c.imports)


# -- substitute_placeholder ------------------------------------------------------------


def test_substitute_placeholder():
    body = f"int x = 1;\n{PLACEHOLDER}"
    assert substitute_placeholder(body, "assertTrue(x > 0);") == "int x = 1;\nassertTrue(x > 0);"
    with pytest.raises(PlaceholderCountError):
        substitute_placeholder("int x = 1;", "assertTrue(x > 0);")
    with pytest.raises(PlaceholderCountError):
        substitute_placeholder(f"{PLACEHOLDER}\n{PLACEHOLDER}", "assertTrue(true);")


# -- fix_imports -------------------------------------------------------------------------


SRC = """package p;

import org.junit.Test;
import org.junit.Test;

public class ATest {
    @Test
    public void testA() {
        List<String> xs = new ArrayList<>();
        java.util.Map<String, String> m = null;
        Widget w = new Widget();
    }
}
"""


def test_fix_imports_dedups_and_adds():
    index = ClasspathIndex.jdk()
    index.add("com.acme.Widget")
    out = fix_imports(SRC, index)
    assert out.count("import org.junit.Test;") == 1
    assert "import java.util.List;" in out
    assert "import java.util.ArrayList;" in out
    assert "import com.acme.Widget;" in out
    assert "import java.util.Map;" not in out
    imports = [ln for ln in out.splitlines() if ln.startswith("import ")]
    assert imports == sorted(imports)


def test_fix_imports_leaves_unknown_names():
    out = fix_imports(SRC, ClasspathIndex())
    assert "Widget" not in "".join(ln for ln in out.splitlines() if ln.startswith("import"))


def test_fix_imports_is_idempotent():
    index = ClasspathIndex.jdk()
    once = fix_imports(SRC, index)
    assert fix_imports(once, index) == once


def test_classpath_index_from_project():
    index = build_classpath_index(PROJECT / "src" / "main")
    assert index.lookup("BoundedStack") == "org.demo.util.BoundedStack"
    assert index.lookup("List") == "java.util.List"
    assert index.lookup("Nope") is None


# -- direct bodies and repairs ----------------------------------------------------------


def test_assemble_body_splits_at_first_oracle():
    body = "@Test\npublic void testX() {\n    int a = 1;\n    assertEquals(1, a);\n}"
    c = assemble_body(body, PRINTER)
    assert c.prefix_text == "int a = 1;"
    assert c.oracle_text == "assertEquals(1, a);"


def test_revise_with_whole_class():
    c = assemble("int a = 1;", "assertEquals(1, a);", PRINTER)
    fixed = c.source_file.replace("assertEquals(1, a);", "assertEquals(1, a);\n        List<String> l = null;")
    r = revise(c, fixed, PRINTER)
    assert r.revision == 1
    assert "import java.util.List;" in r.source_file


def test_revise_with_statements_and_garbage():
    c = assemble("int a = 1;", "assertEquals(1, a);", PRINTER)
    r = revise(c, "int a = 2;\nassertEquals(2, a);", PRINTER)
    assert r.revision == 1 and "int a = 2;" in r.source_file
    g = revise(r, "this is { not java", PRINTER)
    assert g.revision == 2 and g.source_file == "this is { not java\n"


def test_candidate_roundtrip_and_write(tmp_path):
    c = assemble("int a = 1;", "assertEquals(1, a);", PRINTER)
    assert CandidateTest.from_dict(c.to_dict()) == c
    path = write_candidate(c, tmp_path)
    assert path.read_text() == c.source_file
