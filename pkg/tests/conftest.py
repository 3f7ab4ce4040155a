"""Shared fixtures plus a session-wide audit of every mapping the engine produces.

Every call to ``merge_gmaps``, ``candidate_inferences`` and ``incremental_remap``
made anywhere in the test run is intercepted and its output checked with
``mapping_violations``. ``test_zero_mapping_violations`` runs last and asserts
that the audit found nothing.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from functools import wraps
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import analogon.sme as sme  # noqa: E402
import analogon.solver as solver  # noqa: E402
from analogon.corpus import CorpusSpec, generate  # noqa: E402


@dataclass
class MappingAudit:
    mappings: int = 0
    inferences: int = 0
    remaps: int = 0
    violations: list[str] = field(default_factory=list)

    def record(self, where: str, errs: list[str]) -> None:
        self.violations.extend(f"{where}: {e}" for e in errs)


AUDIT = MappingAudit()


def _audited_merge(fn):
    @wraps(fn)
    def merge(hyps, constraints=None, **kw):
        out = fn(hyps, constraints, **kw)
        cons = constraints or hyps.constraints
        for m in out:
            AUDIT.mappings += 1
            AUDIT.record(f"merge {hyps.base.id}->{hyps.target.id}",
                         sme.mapping_violations(m, hyps.base, hyps.target, cons))
        return out
    return merge


def _audited_inferences(fn):
    @wraps(fn)
    def infer(base, target, mapping):
        out = fn(base, target, mapping)
        AUDIT.inferences += len(out)
        # partition flag is irrelevant for plain inferences; check structure only
        AUDIT.record(f"inferences {base.id}->{target.id}",
                     sme.mapping_violations(replace(mapping, inferences=out), base, target,
                                            sme.UNCONSTRAINED))
        return out
    return infer


def _audited_remap(fn):
    @wraps(fn)
    def remap(base, target, mapping, entity, **kw):
        out = fn(base, target, mapping, entity, **kw)
        if out is not None:
            AUDIT.remaps += 1
            cons = kw.get("constraints") or sme.MatchConstraints()
            AUDIT.record(f"remap {base.id}->{target.id} {entity}",
                         sme.mapping_violations(out.mapping, base, target, cons.with_required(entity, out.target_entity)))
            AUDIT.record(f"rewritten {base.id}->{target.id} {entity}",
                         sme.mapping_violations(replace(mapping, inferences=out.inferences), base, target, cons))
        return out
    return remap


def pytest_configure(config):
    merge = _audited_merge(sme.merge_gmaps)
    infer = _audited_inferences(sme.candidate_inferences)
    remap = _audited_remap(sme.incremental_remap)
    for mod in (sme, solver):
        for name, wrapped in (("merge_gmaps", merge), ("candidate_inferences", infer),
                              ("incremental_remap", remap)):
            if hasattr(mod, name):
                setattr(mod, name, wrapped)


def pytest_collection_modifyitems(session, config, items):
    last = [i for i in items if i.name == "test_zero_mapping_violations"]
    rest = [i for i in items if i.name != "test_zero_mapping_violations"]
    items[:] = rest + last


@pytest.fixture(scope="session")
def audit() -> MappingAudit:
    return AUDIT


@pytest.fixture(scope="session")
def corpus():
    return generate(CorpusSpec(seed=0))


@pytest.fixture(scope="session")
def library(corpus):
    return corpus.library()


@pytest.fixture(scope="session")
def taxonomy():
    from analogon.kb import default_taxonomy
    return default_taxonomy()


EXPECTED = Path(__file__).resolve().parent.parent / "expected"


@pytest.fixture(scope="session")
def expected_dir() -> Path:
    return EXPECTED


@pytest.fixture(scope="session")
def retrieval(library):
    from analogon.evaluation import run_retrieval_experiment
    return run_retrieval_experiment(library)


def _ps(library, retrieval, **flags):
    from analogon.config import Config
    from analogon.evaluation import run_ps_experiment
    return run_ps_experiment(library, Config(**flags), retrieval=retrieval)


@pytest.fixture(scope="session")
def baseline(library, retrieval):
    return _ps(library, retrieval)


@pytest.fixture(scope="session")
def no_partitions(library, retrieval):
    return _ps(library, retrieval, partitions=False)


@pytest.fixture(scope="session")
def no_partitions_no_remap(library, retrieval):
    return _ps(library, retrieval, partitions=False, remap=False)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
