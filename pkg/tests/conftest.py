import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

import plugins.beacon  # noqa: E402,F401  registers the "beacon" kind
import plugins.faulty  # noqa: E402,F401

from rantest.config import validate_document  # noqa: E402

SCENARIOS = TESTS.parent / "src" / "rantest" / "scenarios"
REFERENCE = SCENARIOS / "full_attack.yaml"


def make_doc(components, seed=1, duration=100, sid="t", channel=None, **scenario):
    doc = {
        "scenario": {"id": sid, "seed": seed, "duration_slots": duration, **scenario},
        "components": components,
    }
    if channel is not None:
        doc["channel"] = channel
    return doc


def make_spec(components, **kw):
    return validate_document(make_doc(components, **kw))


GNB = {"name": "gnb0", "kind": "gnb"}


def ue(name, pos, **params):
    return {"name": name, "kind": "ue", "depends_on": ["gnb0"], "position_m": pos, "params": params}


@pytest.fixture
def reference_path():
    return REFERENCE
