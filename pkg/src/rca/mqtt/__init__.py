from .topics import topic_matches, parse_topic, parse_filter  # noqa: F401
