"""
Tests for the verification suites
"""
import pytest

from hexloop.hexlattice import preset_domain
from hexloop.suites import SUITES, SpinDominationSuite, SuiteContext, get_suite, list_suites, run_suite


@pytest.fixture
def ctx(single_hex):
    return SuiteContext(domain=single_hex, n=2.0, x=0.4, seed=11, samples=4000)


def test_registry():
    names = [s["name"] for s in list_suites()]
    assert set(names) == {"prop21", "prop31", "lemma41", "lemma42", "eqz", "domination"}
    assert get_suite("eqz") is SUITES["eqz"]
    assert get_suite("nope") is None


@pytest.mark.parametrize("name", sorted(SUITES))
def test_each_suite_passes_on_single_hexagon(ctx, name):
    result = run_suite(name, ctx)
    assert result["success"], result["error"] or result["report"]
    assert result["error"] is None


def test_partition_suite_on_two_hexagons():
    result = run_suite("eqz", SuiteContext(domain=preset_domain("two_hex"), x=0.6, seed=1))
    assert result["success"]
    report = result["report"]
    assert set(report["identities"]) == {"constant", "random"}
    assert len(report["edge_removal"]) == 11


def test_all_runs_every_suite(ctx):
    result = run_suite("all", ctx)
    assert result["success"]
    assert set(result["report"]) == set(SUITES)


def test_out_of_range_is_reported_not_raised(single_hex):
    result = run_suite("lemma41", SuiteContext(domain=single_hex, n=1.0, x=0.4, seed=1, samples=100))
    assert not result["success"]
    assert "greater than 1" in result["error"]

    combined = run_suite("all", SuiteContext(domain=single_hex, n=1.0, x=0.4, seed=1, samples=100))
    assert not combined["success"]
    assert "lemma41" in combined["error"]


def test_unknown_suite(ctx):
    result = run_suite("prop99", ctx)
    assert not result["success"]
    assert "Unknown suite" in result["error"]


def test_two_sheet_check_is_seeded(ctx):
    first = SpinDominationSuite.two_sheet_check(ctx, 0.8)
    second = SpinDominationSuite.two_sheet_check(ctx, 0.8)
    assert first == second
    assert first["samples"] == 4000
    assert first["violations"] == 0
    assert first["expected"] == pytest.approx(0.8 ** 6)
