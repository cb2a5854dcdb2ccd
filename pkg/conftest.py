# conftest.py
import os

import pytest

# keep local .env files from leaking into the numerics policy
for _k in list(os.environ):
    if _k.startswith("DECOY_"):
        os.environ.pop(_k)

from config import reload_policy  # noqa: E402


@pytest.fixture(autouse=True)
def _fresh_policy():
    reload_policy()
    yield
    reload_policy()


@pytest.fixture
def policy_env(monkeypatch):
    """Set DECOY_<KEY> overrides and reload the policy."""
    def _set(**kv):
        for k, v in kv.items():
            monkeypatch.setenv(f"DECOY_{k.upper()}", str(v))
        return reload_policy()
    return _set
