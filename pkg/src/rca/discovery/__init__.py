from .registry import Registry, ServiceRegistration  # noqa: F401
