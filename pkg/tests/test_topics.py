"""Topic parsing and wildcard matching, checked against a recursive oracle."""

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rca.mqtt.topics import (BadTopic, matches, parse_filter, parse_topic,
                             topic_matches)


def oracle_match(filt, topic):
    """Hand-executed recursive matcher used only as a test oracle."""
    if not filt:
        return not topic
    head, rest = filt[0], filt[1:]
    if head == "#":
        return not rest  # '#' is final and matches zero or more segments
    if not topic:
        return False
    if head == "+" or head == topic[0]:
        return oracle_match(rest, topic[1:])
    return False


def test_exhaustive_small_alphabet_oracle():
    """Every filter/topic pair of length <= 6 over {a, b, +, #} vs {a, b}."""
    filter_segs = ["a", "b", "+", "#"]
    topic_segs = ["a", "b"]
    filters = [list(p) for n in range(1, 7)
               for p in itertools.product(filter_segs, repeat=n)]
    topics = [list(p) for n in range(1, 7)
              for p in itertools.product(topic_segs, repeat=n)]
    valid_filters = [f for f in filters if "#" not in f[:-1]]
    checked = 0
    for f in valid_filters:
        for t in topics:
            assert topic_matches(f, t) == oracle_match(f, t), (f, t)
            checked += 1
    assert checked >= 100_000


@pytest.mark.parametrize("pattern,name,expected", [
    ("smarthome/+/state/#", "smarthome/h1/state/kitchen/light", True),
    ("a/b", "a/b", True),
    ("a/+", "a/b/c", False),
    ("a/#", "a", True),
    ("a/#", "a/b/c/d", True),
    ("#", "anything/at/all", True),
    ("+/b", "a/b", True),
    ("+", "a/b", False),
])
def test_matching_examples(pattern, name, expected):
    assert matches(pattern, name) is expected


class TestParseTopic:
    def test_valid(self):
        assert parse_topic("rca/state/h1/lamp") == ["rca", "state", "h1", "lamp"]

    @pytest.mark.parametrize("bad", ["", "a//b", "/a", "a/", "a/+/b", "a/#",
                                     "a\x00b"])
    def test_invalid(self, bad):
        with pytest.raises(BadTopic):
            parse_topic(bad)

    def test_length_cap(self):
        parse_topic("a" * 512)
        with pytest.raises(BadTopic):
            parse_topic("a" * 513)


class TestParseFilter:
    def test_wildcards_allowed(self):
        assert parse_filter("a/+/#") == ["a", "+", "#"]

    @pytest.mark.parametrize("bad", ["", "a//b", "a/#/b", "a/b#", "a/b+/c",
                                     "a\x00b"])
    def test_invalid(self, bad):
        with pytest.raises(BadTopic):
            parse_filter(bad)


_SEG = st.sampled_from(["a", "b", "c"])


@given(st.lists(_SEG, min_size=1, max_size=6))
def test_exact_filter_matches_itself(segs):
    assert topic_matches(segs, segs)


@given(st.lists(_SEG, min_size=1, max_size=6))
def test_hash_matches_everything(segs):
    assert topic_matches(["#"], segs)


@given(st.lists(_SEG, min_size=1, max_size=5))
def test_prefix_hash_matches_parent_level(segs):
    # "a/#" also matches the parent topic "a" itself
    assert topic_matches(segs + ["#"], segs)
