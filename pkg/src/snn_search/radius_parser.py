"""
Radius literals accepted on the command line.

Plain decimals (``0.05``, ``1e-3``) and multiples or fractions of pi
(``0.30pi``, ``0.3*pi``, ``0.3π``, ``pi``, ``pi/3``, ``2pi/3``), optionally
as a comma separated list (``0.02,0.05,0.14``).
"""

import math

from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError, VisitError

from snn_search.errors import ParameterError

RADIUS_GRAMMAR = r"""
    ?start: radius_list

    radius_list: radius ("," radius)*

    ?radius: number
           | angle

    angle: PI                        -> pi
         | number "*"? PI             -> pi_times
         | PI "/" number              -> pi_over
         | number "*"? PI "/" number  -> pi_fraction

    number: DECIMAL

    PI: "pi" | "π"
    DECIMAL: /[+-]?[0-9]+(\.[0-9]*)?([eE][+-]?[0-9]+)?/
           | /[+-]?\.[0-9]+([eE][+-]?[0-9]+)?/

    %import common.WS
    %ignore WS
"""


def _pi_fraction(factor: float, divisor: float) -> float:
    if divisor == 0:
        raise ParameterError("division by zero in radius literal")
    return factor * math.pi / divisor


@v_args(inline=True)
class RadiusTransformer(Transformer):
    def number(self, token) -> float:
        return float(token)

    def pi(self, _pi) -> float:
        return math.pi

    def pi_times(self, factor: float, _pi) -> float:
        return factor * math.pi

    def pi_over(self, _pi, divisor: float) -> float:
        return _pi_fraction(1.0, divisor)

    def pi_fraction(self, factor: float, _pi, divisor: float) -> float:
        return _pi_fraction(factor, divisor)

    def radius_list(self, *radii: float) -> list[float]:
        return list(radii)


_PARSER = Lark(RADIUS_GRAMMAR, parser="lalr", transformer=RadiusTransformer())


def parse_radii(text: str) -> list[float]:
    """
    Parse a comma separated list of radius literals.

    Raises:
        ParameterError: If ``text`` is not a valid list of nonnegative finite radii.
    """
    try:
        radii = _PARSER.parse(text)
    except VisitError as err:
        if isinstance(err.orig_exc, ParameterError):
            raise err.orig_exc from None
        raise ParameterError(f"invalid radius {text!r}") from err
    except LarkError:
        raise ParameterError(f"invalid radius {text!r}") from None
    for radius in radii:
        if not math.isfinite(radius):
            raise ParameterError(f"radius must be finite, got {radius}")
        if radius < 0:
            raise ParameterError(f"negative radius: {radius}")
    return radii


def parse_radius(text: str) -> float:
    """Parse exactly one radius literal."""
    radii = parse_radii(text)
    if len(radii) != 1:
        raise ParameterError(f"expected a single radius, got {len(radii)}")
    return radii[0]
