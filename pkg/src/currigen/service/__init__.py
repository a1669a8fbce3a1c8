from currigen.service.app import create_app  # noqa: F401
