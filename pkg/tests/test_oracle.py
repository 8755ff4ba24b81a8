import numpy as np
import pytest

from crudesched import Evaluator, genome_bounds, parse_instance
from crudesched.oracle import (
    OracleSizeError,
    enumerate_genomes,
    genome_domains,
    lattice_size,
    oracle_fitness,
    oracle_search,
)

from conftest import tiny_doc


def micro_instance(horizon=2, feed_lo=2.0):
    """1 CDU x 1 slot x 2 tanks, no vessels: a walkable decision lattice."""
    doc = tiny_doc()
    doc["horizon_periods"] = horizon
    doc["vessels"] = []
    doc["tanks"] = doc["tanks"][:2]
    doc["cdus"][0]["max_charging_tanks"] = 1
    doc["cdus"][0]["feed_bounds"] = [feed_lo, 10]
    doc["residues"][0]["consumption"] = 1.0
    return parse_instance(doc)


def test_oracle_matches_kernel_on_random_genomes(tiny_instance):
    rng = np.random.default_rng(23)
    lo, hi = genome_bounds(tiny_instance)
    ev = Evaluator(tiny_instance)
    for _ in range(300):
        g = rng.uniform(lo, hi)
        a = ev.evaluate(g)
        b = oracle_fitness(tiny_instance, g)
        assert a.cvn == b.cvn
        assert a.cv == pytest.approx(b.cv, abs=1e-12)
        assert a.objective == b.objective


def test_oracle_matches_kernel_on_the_full_lattice():
    inst = micro_instance()
    domains = genome_domains(inst, charge_flows=[0.0, 3.0, 6.0])
    ev = Evaluator(inst)
    n = 0
    for g in enumerate_genomes(domains):
        a = ev.evaluate(g)
        b = oracle_fitness(inst, g)
        assert (a.cvn, a.objective) == (b.cvn, b.objective)
        assert a.cv == pytest.approx(b.cv, abs=1e-12)
        n += 1
    assert n == lattice_size(domains) == (3 * 3) ** 2


def test_oracle_search_finds_known_optimum():
    inst = micro_instance()
    domains = genome_domains(inst, charge_flows=[0.0, 3.0, 6.0])
    best_g, best_f, count = oracle_search(inst, domains)
    assert count == 81
    assert best_f.feasible
    assert best_f.objective == 0.0  # charge the same tank both periods
    # and the production evaluator agrees on the winner
    assert Evaluator(inst).evaluate(best_g).key() == best_f.key()


def test_oracle_search_detects_forced_changeover():
    # tank 1 only holds enough for one period at the feed floor, so any
    # feasible schedule that starts on tank 1 must switch
    doc = tiny_doc()
    doc["horizon_periods"] = 2
    doc["vessels"] = []
    doc["tanks"] = doc["tanks"][:2]
    doc["tanks"][0]["initial_contents"] = {"1": 4}
    doc["cdus"][0]["max_charging_tanks"] = 1
    doc["cdus"][0]["feed_bounds"] = [4, 10]
    doc["residues"][0]["consumption"] = 1.0
    inst = parse_instance(doc)
    domains = genome_domains(inst, charge_flows=[0.0, 4.0])
    _, best_f, _ = oracle_search(inst, domains)
    assert best_f.feasible
    assert best_f.objective == 0.0  # tank 2 alone carries both periods
    # now shrink tank 2 as well: 6 < 2 * 4, a switch is unavoidable
    doc["tanks"][1]["initial_contents"] = {"2": 6}
    inst = parse_instance(doc)
    domains = genome_domains(inst, charge_flows=[0.0, 4.0])
    _, best_f, _ = oracle_search(inst, domains)
    assert best_f.feasible
    assert best_f.objective == 1.0


def test_enumeration_guard():
    inst = micro_instance(horizon=3)
    domains = genome_domains(inst, charge_flows=[0.0, 1.0, 2.0, 3.0])
    with pytest.raises(OracleSizeError):
        list(enumerate_genomes(domains, guard=100))
    with pytest.raises(OracleSizeError):
        oracle_search(inst, domains, guard=100)


def test_oracle_rejects_bad_genome_length(tiny_instance):
    with pytest.raises(ValueError):
        oracle_fitness(tiny_instance, [0.0, 1.0])
