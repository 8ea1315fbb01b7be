"""Topic names and filters with MQTT wildcard matching.

Topics are '/'-separated non-empty UTF-8 segments. Filters may use '+'
(exactly one segment) and a trailing '#' (zero or more segments).
"""

from __future__ import annotations

MAX_TOPIC_BYTES = 512


class BadTopic(ValueError):
    pass


def parse_topic(name: str) -> list[str]:
    """Split and validate a concrete topic name."""
    if not name or len(name.encode("utf-8")) > MAX_TOPIC_BYTES:
        raise BadTopic("topic empty or too long")
    segments = name.split("/")
    for seg in segments:
        if not seg:
            raise BadTopic("empty topic segment in %r" % name)
        if "+" in seg or "#" in seg or "\x00" in seg:
            raise BadTopic("wildcard/NUL in topic name %r" % name)
    return segments

def parse_filter(pattern: str) -> list[str]:
    """Split and validate a subscription filter."""
    if not pattern or len(pattern.encode("utf-8")) > MAX_TOPIC_BYTES:
        raise BadTopic("filter empty or too long")
    segments = pattern.split("/")
    for i, seg in enumerate(segments):
        if not seg:
            raise BadTopic("empty filter segment in %r" % pattern)
        if "\x00" in seg:
            raise BadTopic("NUL in filter %r" % pattern)
        if seg == "#":
            if i != len(segments) - 1:
                raise BadTopic("'#' only allowed as final segment: %r" % pattern)
        elif "#" in seg:
            raise BadTopic("'#' must be a whole segment: %r" % pattern)
        elif seg != "+" and "+" in seg:
            raise BadTopic("'+' must be a whole segment: %r" % pattern)
    return segments


def topic_matches(filter_segments: list[str], topic_segments: list[str]) -> bool:
    """True iff the topic matches the filter under MQTT semantics."""
    fi = 0
    for ti, tseg in enumerate(topic_segments):
        if fi >= len(filter_segments):
            return False
        fseg = filter_segments[fi]
        if fseg == "#":
            return True
        if fseg != "+" and fseg != tseg:
            return False
        fi += 1
    # Topic exhausted: filter must be exhausted too, or end in '#'.
    if fi == len(filter_segments):
        return True
    return fi == len(filter_segments) - 1 and filter_segments[fi] == "#"


def matches(pattern: str, name: str) -> bool:
    """Convenience wrapper over raw strings."""
    return topic_matches(parse_filter(pattern), parse_topic(name))
