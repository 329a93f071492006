"""Shared fixtures: a small two-campaign scenario, its flow log, and an
embedding table trained on that traffic. Session-scoped because embedding
training is the slow part."""

import io

import pytest

from dante.config import PipelineConfig
from dante.clustering import ClustererConfig
from dante.embedding import TrainConfig, train
from dante.flows import filter_low_volume_sources
from dante.simgen import CampaignSpec, Scenario, generate, write_csv
from dante.windows import WindowConfig, assign_windows, extract_sequences


def build_corpus(records, config=None, min_packets=3):
    config = config or WindowConfig(240, 60)
    corpus = []
    for window, recs in assign_windows(records, config):
        kept = filter_low_volume_sources(recs, min_packets)
        corpus.extend(extract_sequences(kept, window.index))
    return corpus


@pytest.fixture(scope="session")
def duo_scenario():
    return Scenario(
        name="duo",
        campaigns=(
            CampaignSpec.single("telnet", [23, 23, 2323], 80, jitter_sec=(1, 10)),
            CampaignSpec.single("smb", [445, 445, 445], 60, jitter_sec=(1, 10)),
        ),
        duration_min=480,
        noise_rate=1.0,
        seed=17,
    )


@pytest.fixture(scope="session")
def duo_traffic(duo_scenario):
    records, truth = generate(duo_scenario)
    return records, truth


@pytest.fixture(scope="session")
def duo_csv(duo_traffic):
    buf = io.StringIO()
    write_csv(duo_traffic[0], buf)
    return buf.getvalue()


@pytest.fixture(scope="session")
def duo_table(duo_traffic, tmp_path_factory):
    records, _ = duo_traffic
    corpus = build_corpus(records)
    table = train(corpus, TrainConfig(dim=16, epochs=3, seed=7))
    path = tmp_path_factory.mktemp("table") / "embeddings.txt"
    table.save(str(path))
    return str(path)


def pipeline_config(table_path, state_dir, **overrides) -> PipelineConfig:
    defaults = dict(
        embedding_table=table_path,
        state_dir=str(state_dir),
        clusterer=ClustererConfig(eps=0.3, min_pts=30),
        seed=5,
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)
