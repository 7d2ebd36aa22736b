"""
Acceptance batch for the fragment calculus toolkit.

Runs every acceptance check with timing and logging and exits non-zero when
any of them fails.
"""
import logging
import os
import sys
import time
from typing import Callable, List, Tuple

# Add parent directory to path to import fragcalc modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from fragcalc import harness, redgraph
from fragcalc.config import get_settings
from fragcalc.formula import Atom, Variable, forall_many
from fragcalc.fpalg import RatFunc, enumerate_height, exists_bounded, is_pth_power, pth_root_decompose, recompose
from fragcalc.fragments import F0, mem_fragment, parse_descriptor
from fragcalc.godel import godel_decode, godel_encode
from fragcalc.models import Hypothesis
from fragcalc.pcoding import pi_formula
from fragcalc.signature import LiteralDomain, RESIDUE_RING, extend_with_constants, residue_ring, ring, val, with_presentation
from fragcalc.structures import (
    embeddings, evaluate, finite_field, gamma2, gamma3, gamma4, modular_ring, tournament_models, tournament_sentence
)
from fragcalc.syntax import make_literal
from fragcalc.vfred import tau_finite_residue

settings = get_settings()

logging.basicConfig(
    level=logging.INFO,
    format=settings.log_format
)
logger = logging.getLogger(__name__)

FRAGMENT_DESCRIPTORS = ("E", "A1[E]", "A1 E", "A2 E", "A^2 E")


class AcceptanceRunner:
    def __init__(self, seed: int = settings.corpus_seed):
        self.rng = harness.corpus_rng(seed)
        self.failures: List[str] = []

    def fail(self, message: str) -> None:
        logger.error(message)
        self.failures.append(message)

    def check_tournaments(self):
        sigma = tournament_sentence()
        if not mem_fragment(parse_descriptor("A^2 E"), None, sigma):
            self.fail("tournament sentence not in A^2 E")
        if mem_fragment(parse_descriptor("A2 E"), None, sigma):
            self.fail("tournament sentence in A2 E")
        for copies in (1, 2, 3):
            m, n = tournament_models(copies)
            if not evaluate(n, sigma) or evaluate(m, sigma):
                self.fail(f"tournament separation fails for {copies} copies")
        counts = (len(embeddings(gamma3(), gamma4())), len(embeddings(gamma2(), gamma3())),
                  len(embeddings(gamma3(), gamma2())))
        if counts != (3, 3, 0):
            self.fail(f"embedding counts {counts}, expected (3, 3, 0)")

    def check_fragments(self, max_size: int = 9):
        x, y = Variable("x", "vertex"), Variable("y", "vertex")
        universe = harness.enumerate_formulas(max_size, [Atom("E", (x, y))], [x])
        for text in FRAGMENT_DESCRIPTORS:
            d = parse_descriptor(text)
            generated = harness.grammar_members(d, universe)
            accepted = {phi for phi in universe if mem_fragment(d, None, phi)}
            if generated != accepted:
                self.fail(f"{text}: grammar gives {len(generated)} members, membership accepts {len(accepted)}")
            else:
                logger.info(f"{text}: {len(accepted)} of {len(universe)} formulas agree")

    def check_prenex(self, count: int = 1000):
        language = ring()
        structures = [modular_ring(2), modular_ring(3), modular_ring(4), finite_field(4)]
        formulas = [harness.random_formula(language, 8, self.rng) for _ in range(count)]
        for mismatch in harness.check_prenex_equivalence(structures, formulas):
            self.fail(f"prenex mismatch: {mismatch}")

    def check_oracle(self, count: int = 500):
        for p in (2, 3):
            pool = enumerate_height(p, 2)
            for _ in range(count):
                f = self.rng.choice(pool) * self.rng.choice(pool) + RatFunc.s(p)
                if recompose(p, pth_root_decompose(p, f)) != f:
                    self.fail(f"reconstruction fails for {f} over F{p}(s)")
        domain = LiteralDomain(kind="Fp(s)", p=2)
        for f in enumerate_height(2, 1):
            if f.is_zero():
                continue
            result = exists_bounded(pi_formula(2, 1, [make_literal(domain, f)]), 1, 2)
            if result.sat != is_pth_power(2, f):
                self.fail(f"pi(z) and p-th power test disagree at {f}")

    def check_reductions(self, count: int = 100):
        for problem in harness.check_reductions(count, self.rng):
            self.fail(problem)

    def check_finite_residue(self, count: int = 100):
        language = residue_ring()
        pool = [Variable("k1", RESIDUE_RING.sort), Variable("k2", RESIDUE_RING.sort)]
        for q in (2, 3, 4):
            structure = finite_field(q, RESIDUE_RING)
            for r in (1, 2):
                for _ in range(count):
                    matrix = harness.random_quantifier_free(language, 5, self.rng, pool[:r])
                    phi = forall_many(pool[:r], matrix)
                    reduced = tau_finite_residue(q, F0, language, phi)
                    if evaluate(structure, phi) != evaluate(structure, reduced):
                        self.fail(f"finite residue reduction disagrees over F{q}, r={r}")

    def check_godel(self, count: int = 500):
        languages = [ring(), extend_with_constants(ring(), ["t"], "field"), val(),
                     extend_with_constants(val(), ["t"], "field")]
        for i in range(count):
            language = with_presentation(languages[i % len(languages)])
            phi = harness.random_formula(language, 8, self.rng)
            if godel_decode(language, godel_encode(language, phi)) != phi:
                self.fail(f"godel round trip fails in {language.name}")

    def check_graph(self):
        if len(redgraph.laurent_nodes()) != 14:
            self.fail("the Laurent series side does not have 14 nodes")
        for colour, members in redgraph.colour_groups(("orange", "blue")).items():
            if not set(members) <= redgraph.class_of(members[0], {Hypothesis.K_FINITE}):
                self.fail(f"{colour} nodes are not one class under kFinite")
        path = redgraph.reduction_path("VFPI7", "VFPIb4", {Hypothesis.K_PERFECT})
        if path is None or len(path) != 1:
            self.fail("VFPI7 -> VFPIb4 is not a single edge under kPerfect")
        if redgraph.reduction_path("VFb4", "F2", {Hypothesis.R4}) is not None:
            self.fail("VFb4 -> F2 reachable from R4 alone")
        if redgraph.reduction_path("VFb4", "F2", {Hypothesis.R4, Hypothesis.K_FINITE}) is None:
            self.fail("VFb4 -> F2 unreachable under R4 and kFinite")
        if redgraph.reduction_path("VF7", "VF7") != []:
            self.fail("path from a node to itself is not empty")

    def run(self) -> bool:
        checks: List[Tuple[str, Callable[[], None]]] = [
            ("tournaments", self.check_tournaments),
            ("fragments", self.check_fragments),
            ("prenex", self.check_prenex),
            ("oracle", self.check_oracle),
            ("reductions", self.check_reductions),
            ("finite residue", self.check_finite_residue),
            ("godel", self.check_godel),
            ("graph", self.check_graph),
        ]
        for name, check in checks:
            started = time.time()
            before = len(self.failures)
            check()
            status = "ok" if len(self.failures) == before else "FAILED"
            logger.info(f"{name}: {status} in {time.time() - started:.2f}s")
        return not self.failures


def main():
    runner = AcceptanceRunner()
    if runner.run():
        logger.info("All acceptance checks passed")
        return 0
    logger.error(f"{len(runner.failures)} acceptance failures")
    return 1


if __name__ == "__main__":
    sys.exit(main())
