import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def world():
    from xlembed.synthetic import ToyWorld

    return ToyWorld(0)


@pytest.fixture(scope="session")
def desk_instances(world):
    """The 200 mined and teacher-scored instances of the default desk run."""
    from xlembed.encoder import encoder_from_spec
    from xlembed.mining import MiningSettings, mine_hard_negatives, score_teacher, teacher_from_spec
    from xlembed.pipeline import ExpansionSettings, build_dataset
    from xlembed.synthetic import DESK_LANGS

    examples = world.nli_corpus(20)
    instances, _ = build_dataset(examples, world.translation_records(examples, DESK_LANGS),
                                 ExpansionSettings(DESK_LANGS))
    corpus = sorted({t for inst in instances for t in (*inst.pos, *inst.neg)})
    enc = encoder_from_spec("toy:13:32")
    E, Q = enc.embed(corpus), enc.embed([inst.query for inst in instances])
    settings = MiningSettings(15, (2, 100), 13)
    teacher = teacher_from_spec("toy-oracle:0")
    return [score_teacher(mine_hard_negatives(inst, corpus, E, q, settings), teacher)
            for inst, q in zip(instances, Q)]


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2])):
            terminalreporter.write_line(line)
