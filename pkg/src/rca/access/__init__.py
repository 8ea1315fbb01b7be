from .store import GrantStore, Grant  # noqa: F401
