from .tokens import Principal, issue_token, validate_token  # noqa: F401
