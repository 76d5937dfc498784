import os

import pytest

from rtlfsim import elaborate, generate_fault_list, load_stimulus, parse_files

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DESIGNS = os.path.join(REPO, "designs")

CORPUS = ["fig1", "adder4", "counter8", "shift8", "mealy", "fir4"]


def design_path(name: str, ext: str = ".v") -> str:
    return os.path.join(DESIGNS, name + ext)


@pytest.fixture(scope="session")
def corpus():
    """name -> (design, stimulus) for every bundled design."""
    out = {}
    for name in CORPUS:
        design = elaborate(parse_files([design_path(name)], name), name)
        stim = load_stimulus(design_path(name, ".stim"))
        out[name] = (design, stim)
    return out


@pytest.fixture(scope="session")
def corpus_faults(corpus):
    """name -> exhaustive stuck-at list over declared wires."""
    return {name: generate_fault_list(design) for name, (design, _) in corpus.items()}
