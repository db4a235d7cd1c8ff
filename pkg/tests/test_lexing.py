from crossctx import lexing


def test_code_tokens_basic():
    assert lexing.code_tokens("def f(x):") == ["def", "f", "(", "x", ")", ":"]


def test_code_tokens_sum_is_one_token():
    assert lexing.code_tokens("[SUM]") == ["[SUM]"]
    assert lexing.code_tokens("x[SUM]y") == ["x", "[SUM]", "y"]
    assert lexing.code_tokens("[SUMX]") == ["[", "SUMX", "]"]


def test_code_tokens_unicode_words():
    assert lexing.code_tokens("naïve = café") == ["naïve", "=", "café"]


def test_code_token_spans_cover_tokens():
    text = "a = b(c, 'd')  # e"
    spans = lexing.code_token_spans(text)
    assert [text[s:e] for s, e in spans] == lexing.code_tokens(text)


def test_tokens_never_span_newlines():
    # Line-based truncation arithmetic relies on this additivity.
    for text in ("ab\ncd", "[SU\nM]", "a.\n.b", "x\n\n\ny"):
        per_line = sum(len(lexing.code_tokens(line))
                       for line in text.split("\n"))
        assert len(lexing.code_tokens(text)) == per_line


def test_get_tokenizer():
    profile = lexing.get_tokenizer("code")
    assert profile.count("a b") == 2
    try:
        lexing.get_tokenizer("nope")
    except ValueError as exc:
        assert "nope" in str(exc)
    else:
        raise AssertionError("unknown profile should raise")


def test_identifier_tokens_skip_keywords_strings_comments():
    code = 'for item in items:  # count\n    total = len("abc") + item\n'
    assert lexing.identifier_tokens(code) == [
        "item", "items", "total", "len", "item"]


def test_identifier_tokens_ignore_numbers():
    assert lexing.identifier_tokens("x = 1.5e-3 + y2") == ["x", "y2"]


def test_statement_tokens_drop_comments_keep_strings():
    assert lexing.statement_tokens("x = 'a b'  # note") == ["x", "=", "'a b'"]


def test_scan_tolerates_unterminated_string():
    kinds = [t.kind for t in lexing.scan("x = 'abc")]
    assert kinds == ["NAME", "OP", "STRING"]


def test_scan_unterminated_string_stops_at_newline():
    tokens = list(lexing.scan("x = 'abc\ny = 2"))
    values = [t.value for t in tokens]
    assert "'abc" in values and "y" in values


def test_scan_triple_quoted_string():
    kinds = [t.kind for t in lexing.scan('"""doc\nstring"""\nname')]
    assert kinds == ["STRING", "NAME"]


def test_scan_string_prefixes():
    tokens = list(lexing.scan('rb"raw" f"x{y}"'))
    assert [t.kind for t in tokens] == ["STRING", "STRING"]


def test_number_scanning_variants():
    values = [t.value for t in lexing.scan("1.5e-3 0x1f 10_000 2j")
              if t.kind == "NUMBER"]
    assert values == ["1.5e-3", "0x1f", "10_000", "2j"]


def test_find_header_colon_simple():
    assert lexing.find_header_colon("def f(d={1: 2}) -> int:") == 22


def test_find_header_colon_dict_in_header():
    text = "for k in {1: 2}: pass"
    assert lexing.find_header_colon(text) == 15


def test_find_header_colon_none():
    assert lexing.find_header_colon("x = {1: 2}") == -1


def test_find_header_colon_skips_lambda():
    assert lexing.find_header_colon("x = lambda a: a") == -1
