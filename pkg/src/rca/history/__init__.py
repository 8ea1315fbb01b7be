from .store import StateStore  # noqa: F401
