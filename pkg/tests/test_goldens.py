import pytest

from execution.goldens import SUITES, build_suite, compare_golden, exponents_table, generate_golden
from tools.lab_errors import InvalidInputError


def test_exponent_table_covers_grid():
    table = exponents_table()
    # quarter steps up to n+1 for n = 2, 3, 4, five exponents each
    assert len(table) == (12 + 16 + 20) * 5
    assert {"alpha", "q", "beta"} <= set(table.columns)


def test_generate_then_compare_is_clean(tmp_path):
    path = generate_golden("exponents", root=str(tmp_path))
    assert path.read_text().startswith("# suite=exponents\n")
    assert compare_golden("exponents", root=str(tmp_path)) == []


def test_tampered_golden_is_reported(tmp_path):
    path = generate_golden("exponents", root=str(tmp_path))
    lines = path.read_text().splitlines()
    # first data row follows two header comments and the column line
    lines[3] = lines[3] + "9"
    path.write_text("\n".join(lines) + "\n")
    problems = compare_golden("exponents", root=str(tmp_path))
    assert len(problems) == 1
    assert problems[0].startswith("exponents row 0")


def test_unknown_suite():
    with pytest.raises(InvalidInputError):
        build_suite("weather")


def test_missing_golden(tmp_path):
    with pytest.raises(InvalidInputError):
        compare_golden("exponents", root=str(tmp_path))


@pytest.mark.slow
@pytest.mark.parametrize("suite", sorted(set(SUITES) - {"exponents"}))
def test_slow_suites_round_trip(tmp_path, suite):
    generate_golden(suite, root=str(tmp_path))
    assert compare_golden(suite, root=str(tmp_path)) == []
