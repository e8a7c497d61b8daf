import json
import os
from pathlib import Path

import pytest

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def golden_compare():
    """Compare data against a frozen JSON file.

    Set HEXEVO_UPDATE_GOLDEN=1 to (re)write the frozen files instead of
    comparing; review the diff before committing.
    """

    def compare(name: str, data):
        path = GOLDEN_DIR / name
        blob = json.dumps(data, indent=1, sort_keys=True)
        if os.environ.get("HEXEVO_UPDATE_GOLDEN") == "1":
            GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
            path.write_text(blob + "\n")
            return
        if not path.exists():
            pytest.fail(f"golden file {name} missing; run with HEXEVO_UPDATE_GOLDEN=1 to create")
        assert json.loads(path.read_text()) == json.loads(blob), f"golden mismatch for {name}"

    return compare
