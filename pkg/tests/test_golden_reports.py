"""Checked-in golden reports: both modes must reproduce them exactly."""

import os

import pytest

from rtlfsim import DetectionReport, run_concurrent, run_serial

from conftest import CORPUS, DESIGNS


def golden(name: str) -> DetectionReport:
    path = os.path.join(DESIGNS, "golden", f"{name}.report.json")
    with open(path, encoding="utf-8") as f:
        return DetectionReport.from_json(f.read())


@pytest.mark.parametrize("name", CORPUS)
def test_serial_reproduces_golden(name, corpus, corpus_faults):
    design, stim = corpus[name]
    report = run_serial(design, corpus_faults[name], stim)
    assert report.semantic_map() == golden(name).semantic_map()


@pytest.mark.parametrize("name", CORPUS)
def test_concurrent_reproduces_golden(name, corpus, corpus_faults):
    design, stim = corpus[name]
    report = run_concurrent(design, corpus_faults[name], stim, w=64)
    assert report.semantic_map() == golden(name).semantic_map()
