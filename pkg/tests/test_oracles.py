"""The frozen oracle values must still be what the oracles compute."""

import json

from oracles.freeze import FROZEN, compute


def test_frozen_values_reproduce():
    assert compute() == json.loads(FROZEN.read_text())
