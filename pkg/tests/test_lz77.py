"""
LZ77 Parser Tests
"""

import pytest

from gluesearch.errors import LZ77FormatError
from gluesearch.lz77 import (
    Copy,
    Literal,
    ParseResult,
    decode,
    dump_phrases,
    format_symbol,
    load_phrases,
    parse,
    parse_multi,
)

from .conftest import ALPHABETS, random_instance, random_text

a, b = ord("a"), ord("b")


def phrase_length(phrase) -> int:
    return 1 if isinstance(phrase, Literal) else phrase.length


class TestParse:
    """Tests for the single-sequence parse."""

    def test_empty(self):
        result = parse("")
        assert result.phrases == []
        assert result.pattern_boundaries == []
        assert result.total_length == 0

    def test_no_repeats(self):
        assert parse("ab").phrases == [Literal(a), Literal(b)]

    def test_unary(self):
        assert parse("aaaa").phrases == [Literal(a), Copy(1, 1), Copy(1, 2)]

    def test_fibonacci_word(self):
        assert parse("abaababaabaab").phrases == [
            Literal(a), Literal(b), Copy(1, 1), Copy(1, 3), Copy(2, 5), Copy(1, 2),
        ]

    def test_leftmost_source(self):
        # "ab" occurs at 1 and 3; the copy must name the first
        assert parse("ababab").phrases[-1] == Copy(1, 2)

    def test_copies_never_overlap(self, rng):
        for _ in range(20):
            text = random_text(rng, 120, "ab")
            position = 1
            for phrase in parse(text).phrases:
                if isinstance(phrase, Copy):
                    assert phrase.src + phrase.length - 1 < position
                position += phrase_length(phrase)

    def test_decode_inverts_parse(self, rng):
        for _ in range(500):
            text = random_instance(rng, min_len=1)[0].encode()
            assert decode(parse(text).phrases) == text

    def test_phrases_are_maximal_and_leftmost(self, rng):
        for _ in range(200):
            data = random_instance(rng, max_len=300, min_len=1)[0].encode()
            pos = 0
            for phrase in parse(data).phrases:
                length = phrase_length(phrase)
                prefix = data[:pos]
                if isinstance(phrase, Literal):
                    assert bytes([phrase.symbol]) not in prefix
                else:
                    assert prefix.index(data[pos:pos + length]) == phrase.src - 1
                if pos + length < len(data):
                    assert data[pos:pos + length + 1] not in prefix
                pos += length


class TestParseMulti:
    """Tests for parsing several patterns together."""

    def test_repeated_pattern(self):
        result = parse_multi(["ab", "ab"])
        assert result.phrases == [Literal(a), Literal(b), Copy(1, 2)]
        assert result.phrase_count == 3
        assert result.pattern_boundaries == [2, 4]

    def test_single_pattern_matches_parse(self):
        assert parse_multi(["abaababaabaab"]).phrases == parse("abaababaabaab").phrases

    def test_no_patterns(self):
        result = parse_multi([])
        assert result.phrases == []
        assert result.pattern_boundaries == []

    def test_phrases_respect_boundaries(self, rng):
        patterns = [random_text(rng, rng.randint(1, 30), "ab") for _ in range(15)]
        result = parse_multi(patterns)
        boundaries = set(result.pattern_boundaries)

        position = 0
        for phrase in result.phrases:
            end = position + phrase_length(phrase)
            assert not any(position < boundary < end for boundary in boundaries)
            position = end
        assert decode(result.phrases) == "".join(patterns).encode()

    def test_boundaries_add_at_most_one_phrase_each(self, rng):
        for _ in range(200):
            alphabet = rng.choice(ALPHABETS)
            patterns = [random_text(rng, rng.randint(1, 60), alphabet) for _ in range(rng.randint(1, 12))]
            joined = parse("".join(patterns))
            assert parse_multi(patterns).phrase_count <= joined.phrase_count + len(patterns)

    def test_to_dict(self):
        data = parse_multi(["ab", "ab"]).to_dict()
        assert data["phrase_count"] == 3
        assert data["total_length"] == 4
        assert data["phrases"] == ["L a", "L b", "C 1 2"]


class TestDecode:
    """Tests for expanding phrases."""

    def test_decode(self):
        assert decode([Literal(a), Copy(1, 1), Copy(1, 2)]) == b"aaaa"

    def test_decode_empty(self):
        assert decode([]) == b""

    @pytest.mark.parametrize("phrases", [
        [Copy(1, 1)],
        [Literal(a), Copy(1, 2)],
        [Literal(a), Copy(0, 1)],
        [Literal(a), Copy(1, 0)],
    ])
    def test_malformed_copy(self, phrases):
        with pytest.raises(LZ77FormatError):
            decode(phrases)


class TestPhraseDump:
    """Tests for the textual phrase format."""

    def test_format_symbol(self):
        assert format_symbol(ord("a")) == "a"
        assert format_symbol(ord(" ")) == "0x20"
        assert format_symbol(10) == "0x0a"
        assert format_symbol(0xFF) == "0xff"

    def test_dump(self):
        dump = dump_phrases(parse_multi(["ab", "ab"]))
        assert dump == "L a\nL b\nC 1 2\nB 2 4\n"

    def test_load_inverts_dump(self):
        result = parse_multi([b"a b\n", b"\xff\xffa b"])
        loaded = load_phrases(dump_phrases(result))
        assert loaded.phrases == result.phrases
        assert loaded.pattern_boundaries == result.pattern_boundaries

    def test_load_skips_blank_lines(self):
        assert load_phrases("L a\n\nC 1 1\n").phrases == [Literal(a), Copy(1, 1)]

    @pytest.mark.parametrize("dump", ["X 1 2\n", "L ab\n", "C one 2\n", "L 0xzz\n", "C 1\n"])
    def test_malformed_dump(self, dump):
        with pytest.raises(LZ77FormatError):
            load_phrases(dump)

    def test_empty_result(self):
        assert load_phrases(dump_phrases(ParseResult())).phrases == []
