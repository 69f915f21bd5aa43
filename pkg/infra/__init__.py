# infra/__init__.py
