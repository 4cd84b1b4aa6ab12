from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from contractgen.config import RunConfig, packaged_fixtures, packaged_stories  # noqa: E402
from contractgen.contract import ArtifactKind, VisualArtifact  # noqa: E402
from contractgen.story import parse_story  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

STORY_PATH = packaged_stories() / "demo.json"


@pytest.fixture(scope="session")
def demo_story():
    return parse_story(STORY_PATH.read_bytes())


@pytest.fixture
def story_path() -> Path:
    return STORY_PATH


@pytest.fixture
def fixtures_dir() -> Path:
    return packaged_fixtures()


@pytest.fixture
def run_config(tmp_path):
    def make(scenario: str = "demo", **kw) -> RunConfig:
        kw.setdefault("fixed_clock", True)
        return RunConfig(scenario=scenario, output_dir=tmp_path, **kw)
    return make


def figure(label: str, *sections: str, description: str = "A figure.") -> VisualArtifact:
    return VisualArtifact(ArtifactKind.FIGURE, label, description, sections or ("s1",))


def table(label: str, *sections: str, description: str = "A table.") -> VisualArtifact:
    return VisualArtifact(ArtifactKind.TABLE, label, description, sections or ("s1",), ("A", "B"), (("1", "2"),))


def minimal_story(**overrides) -> dict:
    d = {
        "schema_version": 1,
        "id": "mini",
        "title": "Mini",
        "narrative": [{"tag": "motivation", "body": "why"}, {"tag": "method", "body": "how"}],
        "evidence": [],
        "references": [],
    }
    d.update(overrides)
    return d


def story_bytes(**overrides) -> bytes:
    return json.dumps(minimal_story(**overrides)).encode()
