import random
from pathlib import Path

import pytest

from mpst import runtime
from mpst.dfcheck import Collection
from mpst.parser import parse_program
from mpst.typecheck import typecheck_program

CORPUS = Path(__file__).resolve().parent.parent / "src" / "mpst" / "corpus"

ACCEPT_CORPUS = ("hello", "relay", "array", "cloud")


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


def load_program(name: str):
    return parse_program((CORPUS / f"{name}.mps").read_text())


_main_cache: dict = {}


def accepted_main(name: str):
    """Parse + typecheck a corpus program once; returns elaborated main."""
    if name not in _main_cache:
        _main_cache[name] = typecheck_program(load_program(name))
    return _main_cache[name]


def crossed_pool() -> runtime.Pool:
    """Two threads holding both channels in crossed receive order."""
    from mpst.parser import parse_expr
    from mpst.statics import normalize
    from mpst.parser import parse_stype
    from mpst.syntax import DEndpoint, subst_term
    from mpst.typecheck import ChannelInfo

    proto = normalize(parse_stype("msg(1 -> 0, string) :: end(1)"))
    sig = {0: ChannelInfo(proto, (0, 1)), 1: ChannelInfo(proto, (0, 1))}
    t1 = parse_expr("let (x, v) = recv(EPC0) in "
                    "let d = send(EPD1, v) in (close(d); wait(x))")
    t1 = subst_term(t1, "EPC0", DEndpoint(0, (0,)))
    t1 = subst_term(t1, "EPD1", DEndpoint(1, (1,)))
    t2 = parse_expr("let (x, v) = recv(EPD0) in "
                    "let c = send(EPC1, v) in (close(c); wait(x))")
    t2 = subst_term(t2, "EPD0", DEndpoint(1, (0,)))
    t2 = subst_term(t2, "EPC1", DEndpoint(0, (1,)))
    from mpst.syntax import DUnit
    return runtime.Pool({0: DUnit(), 1: t1, 2: t2}, sig, 2, 3)


def random_collection(rng: random.Random, max_channels: int = 5,
                      max_sets: int = 6) -> Collection:
    """A random abstract collection with whole cohorts placed in sets."""
    n_sets = rng.randint(1, max_sets)
    sets: list[set] = [set() for _ in range(n_sets)]
    n_chan = rng.randint(0, max_channels)
    universes: dict[int, tuple[int, ...]] = {}
    for c in range(n_chan):
        cohort = rng.randint(1, 4)
        # carve the universe {0..cohort-1} into one role per endpoint
        universes[c] = tuple(range(cohort))
        for i in range(cohort):
            sets[rng.randrange(n_sets)].add((c, (i,)))
    return Collection(tuple(frozenset(s) for s in sets), universes)
