"""
Jinja rendering of the human-readable CLI reports.

Templates live in ``snn_search/templates``. Timing values are only ever
rendered on lines that start with ``time:`` or behind a `` | `` column
separator, so the rest of a report is reproducible byte for byte.
"""

import math
from collections.abc import Callable
from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader, StrictUndefined, Template


def package_root(*sub) -> Path:
    root = Path(__file__).parent
    if not sub:
        return root.resolve()
    return root.joinpath(*sub).resolve()


def fmt_num(value: float | None, digits: int = 6) -> str:
    """Compact general format; ``nan`` and ``None`` render as ``-``."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{digits}g}"


def fmt_pct(value: float | None, decimals: int = 4) -> str:
    """Render a fraction as a percentage."""
    if value is None:
        return "-"
    return f"{100 * value:.{decimals}f}%"


def fmt_seconds(value: float | None) -> str:
    if value is None:
        return "-"
    return f"{value:.6f}s"


class ReportRenderer:
    """Handles Jinja2 template rendering of reports."""

    def __init__(self, search_path: Path | list[Path] | None = None):
        """
        Initialize the renderer.

        Args:
            search_path: Path or list of paths searched before the bundled templates
        """
        search_path = search_path or []
        if not isinstance(search_path, list):
            search_path = [search_path]
        self.search_path = search_path
        self.search_path.append(package_root("templates"))
        self.env = Environment(
            loader=FileSystemLoader(self.search_path),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )
        self.add_filter("num", fmt_num)
        self.add_filter("pct", fmt_pct)
        self.add_filter("seconds", fmt_seconds)
        self.add_global("PROG", "snn-search")

    def render(self, name: str, context: dict[str, Any] | None = None) -> str:
        """
        Render the template with the given context.

        Args:
            name: Name of the template to render. Must be in ``search_path``.
            context: Dictionary of variables to pass to the template

        Returns:
            Rendered template as string, ending in exactly one newline
        """
        return self._render(self.env.get_template(name), context)

    def render_str(
        self, template_str: str, context: dict[str, Any] | None = None
    ) -> str:
        """Render a template string with the given context."""
        return self._render(self.env.from_string(template_str), context)

    def _render(self, template: Template, context: dict[str, Any] | None) -> str:
        return template.render(**(context or {})).strip("\n") + "\n"

    def add_filter(self, name: str, func: Callable):
        """
        Add a custom filter to the Jinja environment.

        Args:
            name: Filter name to use in templates
            func: Filter function
        """
        self.env.filters[name] = func

    def add_global(self, name: str, value: Any):
        self.env.globals[name] = value


def render_report(name: str, **context) -> str:
    """Render one of the bundled report templates in one call."""
    return ReportRenderer().render(name, context)
