import pytest

from crossctx.errors import ParseError
from crossctx.source_parser import (EntityKind, SourceMap, compute_locale,
                                    module_locale, module_segments, parse_file)

SRC = '''"""Top doc."""

import os

LIMIT = 10
A, B = 1, 2


@decorator
def top(x):
    return x


class Thing(Base):
    """A thing."""

    KIND = "t"

    def __init__(self, v):
        self.v = v
        self.w: int = 0

    def run(self):
        def inner():
            return 1
        return inner()


if True:
    def hidden():
        return 2
'''


def test_parse_file_entity_census():
    entities = parse_file("pkg/mod.py", SRC)
    kinds = {e.locale: e.kind for e in entities}
    assert kinds == {
        "pkg.mod": EntityKind.FILE,
        "pkg.mod.LIMIT": EntityKind.GLOBAL_VAR,
        "pkg.mod.A": EntityKind.GLOBAL_VAR,
        "pkg.mod.B": EntityKind.GLOBAL_VAR,
        "pkg.mod.top": EntityKind.FUNCTION,
        "pkg.mod.Thing": EntityKind.CLASS,
        "pkg.mod.Thing.__init__": EntityKind.FUNCTION,
        "pkg.mod.Thing.run": EntityKind.FUNCTION,
    }


def test_parse_file_order_and_ids():
    entities = parse_file("pkg/mod.py", SRC)
    assert [e.file_order_index for e in entities] == list(range(len(entities)))
    assert entities[0].kind is EntityKind.FILE
    assert all(e.id == -1 for e in entities)
    locales = [e.locale for e in entities]
    assert locales == [
        "pkg.mod", "pkg.mod.LIMIT", "pkg.mod.A", "pkg.mod.B", "pkg.mod.top",
        "pkg.mod.Thing", "pkg.mod.Thing.__init__", "pkg.mod.Thing.run"]


def test_file_entity_text_has_path_and_docstring():
    entities = parse_file("pkg/mod.py", SRC)
    assert entities[0].text == '# pkg/mod.py\n"""Top doc."""'
    assert entities[0].name == "mod"


def test_file_without_docstring():
    entities = parse_file("m.py", "x = 1\n")
    assert entities[0].text == "# m.py"


def test_empty_file_yields_file_entity_only():
    entities = parse_file("u.py", "")
    assert len(entities) == 1
    assert entities[0].kind is EntityKind.FILE
    assert entities[0].span.start_line == 1


def test_global_var_text_and_multi_target():
    entities = {e.locale: e for e in parse_file("m.py", SRC.replace("pkg/", ""))}
    a = entities["m.A"]
    b = entities["m.B"]
    assert a.text == b.text == "A, B = 1, 2"
    assert a.file_order_index < b.file_order_index


def test_function_text_includes_decorator():
    entities = {e.locale: e for e in parse_file("pkg/mod.py", SRC)}
    assert entities["pkg.mod.top"].text == "@decorator\ndef top(x):\n    return x"


def test_class_text_condensed():
    entities = {e.locale: e for e in parse_file("pkg/mod.py", SRC)}
    assert entities["pkg.mod.Thing"].text == (
        'class Thing(Base):\n'
        '    """A thing."""\n'
        '    KIND = "t"\n'
        '        self.v = v\n'
        '        self.w: int = 0')


def test_method_text_is_dedented():
    entities = {e.locale: e for e in parse_file("pkg/mod.py", SRC)}
    run = entities["pkg.mod.Thing.run"]
    assert run.text.startswith("def run(self):")
    assert "def inner():" in run.text


def test_later_binding_wins():
    src = "def f():\n    return 1\n\n\ndef f():\n    return 2\n"
    functions = [e for e in parse_file("m.py", src)
                 if e.kind is EntityKind.FUNCTION]
    assert len(functions) == 1
    assert "return 2" in functions[0].text


def test_rebinding_across_kinds():
    src = "f = 1\n\n\ndef f():\n    return 2\n"
    members = parse_file("m.py", src)[1:]
    assert [e.kind for e in members] == [EntityKind.FUNCTION]


def test_displaced_class_drops_methods():
    src = "class C:\n    def m(self):\n        return 1\n\n\nC = 3\n"
    members = parse_file("m.py", src)[1:]
    assert [(e.kind, e.locale) for e in members] == [
        (EntityKind.GLOBAL_VAR, "m.C")]


def test_non_name_assignment_targets_skipped():
    src = "x = 1\nx += 1\nself.y = 2\nd[0] = 3\n"
    members = parse_file("m.py", src)[1:]
    assert [e.locale for e in members] == ["m.x"]


def test_nested_defs_are_not_entities():
    src = "if True:\n    def g():\n        pass\n\ntry:\n    X = 1\nexcept Exception:\n    pass\n"
    assert len(parse_file("m.py", src)) == 1


def test_nested_class_is_not_an_entity():
    src = "class A:\n    class B:\n        def m(self):\n            pass\n"
    locales = [e.locale for e in parse_file("m.py", src)]
    assert locales == ["m", "m.A"]


def test_async_defs_and_methods():
    src = "class A:\n    async def go(self):\n        pass\n\n\nasync def top():\n    pass\n"
    kinds = {e.locale: e.kind for e in parse_file("m.py", src)}
    assert kinds["m.A.go"] is EntityKind.FUNCTION
    assert kinds["m.top"] is EntityKind.FUNCTION


def test_module_segments_and_locale():
    assert module_segments("pkg/sub/mod.py") == ("pkg", "sub", "mod")
    assert module_locale("pkg/__init__.py") == "pkg"
    assert module_locale("__init__.py") == "__init__"
    assert module_locale("a\\b.py") == "a.b"


def test_compute_locale():
    assert compute_locale("pkg/mod.py") == "pkg.mod"
    assert compute_locale("pkg/mod.py", name="f") == "pkg.mod.f"
    assert compute_locale("pkg/mod.py", enclosing="pkg.mod.C", name="m") == \
        "pkg.mod.C.m"


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_file("bad.py", "def f(:\n    pass\n")
    assert info.value.path == "bad.py"
    assert info.value.line == 1
    assert "bad.py" in str(info.value)


def test_source_map_uses_byte_columns():
    source = "é = 1\nx = 2"
    smap = SourceMap(source)
    # "é" is two bytes in utf-8, so line 2 starts at byte 7.
    assert smap.segment(2, 0, 2, 5) == "x = 2"
    assert smap.prefix(2, 0) == "é = 1\n"
    assert smap.line(1) == "é = 1"
