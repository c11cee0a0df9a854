import math

import pytest

from snn_search.errors import ParameterError
from snn_search.radius_parser import parse_radii, parse_radius


@pytest.mark.parametrize(
    "text,expected",
    (
        ("0.05", 0.05),
        ("1e-3", 1e-3),
        (".5", 0.5),
        ("0", 0.0),
        ("+2", 2.0),
        ("pi", math.pi),
        ("π", math.pi),
        ("0.30pi", 0.30 * math.pi),
        ("0.3*pi", 0.3 * math.pi),
        ("0.3π", 0.3 * math.pi),
        ("pi/3", math.pi / 3),
        ("2pi/3", 2 * math.pi / 3),
        ("2 * pi / 3", 2 * math.pi / 3),
    ),
)
def test_parse_radius(text, expected):
    assert parse_radius(text) == pytest.approx(expected, rel=1e-15)


def test_parse_radii():
    assert parse_radii("0.02,0.05,0.14") == [0.02, 0.05, 0.14]
    assert parse_radii("0.1, pi/4") == [0.1, pytest.approx(math.pi / 4)]


@pytest.mark.parametrize("text", ("", "abc", "0.1,", "1..2", "pi pi", "2/3", "0.1;0.2"))
def test_invalid(text):
    with pytest.raises(ParameterError, match="invalid radius"):
        parse_radii(text)


def test_negative():
    with pytest.raises(ParameterError, match="negative radius"):
        parse_radius("-0.1")
    with pytest.raises(ParameterError, match="negative radius"):
        parse_radii("0.1,-2pi")


def test_division_by_zero():
    with pytest.raises(ParameterError, match="division by zero"):
        parse_radius("pi/0")


def test_infinite():
    with pytest.raises(ParameterError, match="finite"):
        parse_radius("1e400")


def test_single_radius_required():
    with pytest.raises(ParameterError, match="single radius"):
        parse_radius("0.1,0.2")
