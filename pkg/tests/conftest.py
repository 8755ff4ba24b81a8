import copy

import pytest

from crudesched import bundled_instance_path, load_instance, parse_instance

#: minimal but fully featured document used across the tests
TINY_DOC = {
    "format_version": 1,
    "horizon_periods": 3,
    "berth_count": 1,
    "changeover_cost": 1.0,
    "properties": ["sulfur"],
    "products": ["residue", "distillate"],
    "residue_product": "residue",
    "crudes": [
        {"id": 1, "name": "A", "properties": [0.5],
         "yields": {"1": {"residue": 0.3, "distillate": 0.4}}},
        {"id": 2, "name": "B", "properties": [1.0],
         "yields": {"1": {"residue": 0.2, "distillate": 0.5}}},
    ],
    "vessels": [{"id": 1, "arrival_period": 2, "cargo": {"1": 20}}],
    "tanks": [
        {"id": 1, "capacity": [0, 50], "initial_contents": {"1": 30}},
        {"id": 2, "capacity": [0, 50], "initial_contents": {"2": 30}},
        {"id": 3, "capacity": [0, 50], "initial_contents": {}},
    ],
    "cdus": [
        {"id": 1, "feed_bounds": [2, 10], "max_charging_tanks": 2,
         "property_bounds": [[0, 2]],
         "product_bounds": {"residue": [0, 10], "distillate": [0, 10]}}
    ],
    "residues": [
        {"id": 1, "allowed_crudes": [1, 2], "inventory_bounds": [0, 50],
         "initial_inventory": 10, "consumption": 1.0}
    ],
}


def tiny_doc() -> dict:
    return copy.deepcopy(TINY_DOC)


@pytest.fixture
def tiny_instance():
    return parse_instance(tiny_doc())


@pytest.fixture(scope="session")
def refinery():
    return load_instance(bundled_instance_path())
