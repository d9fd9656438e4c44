import os

import pytest

SLOW_ENV = "WITTEN_LAB_SLOW"


def pytest_collection_modifyitems(config, items):
    if os.getenv(SLOW_ENV) == "1":
        return
    skip_slow = pytest.mark.skip(reason=f"defina {SLOW_ENV}=1 para rodar os testes lentos")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
