from __future__ import annotations

import time
from collections.abc import Iterator, Mapping
from contextlib import contextmanager

from rich.console import Console
from rich.text import Text


def _console_for_color_mode(color: str) -> Console:
    mode = color.strip().lower()
    if mode == "always":
        return Console(stderr=True, force_terminal=True)
    if mode == "never":
        return Console(stderr=True, no_color=True)
    if mode == "auto":
        return Console(stderr=True)
    raise ValueError(f"Invalid color mode: {color!r} (expected auto|always|never)")


class StatusUI:
    """
    Human-facing progress lines on stderr; stdout is reserved for results.

    - On a TTY, `step` shows a spinner while the step runs.
    - Otherwise it prints `==> title` / `<== title (1.23s)` lines (CI friendly).
    - `quiet=True` silences everything.
    """

    def __init__(self, *, quiet: bool = False, color: str = "auto") -> None:
        self.console = _console_for_color_mode(color)
        self.quiet = quiet
        self._live_enabled = self.console.is_terminal and not quiet

    @property
    def live_enabled(self) -> bool:
        return self._live_enabled

    def log(self, message: str, *, style: str | None = None) -> None:
        if self.quiet:
            return
        text = Text(message)
        if style is not None:
            text.stylize(style)
        self.console.print(text)

    def set_status(self, values: Mapping[str, object]) -> None:
        """Single grep-friendly `STATUS k=v ...` line."""
        if self.quiet:
            return
        parts = " ".join(f"{k}={v}" for k, v in values.items())
        self.console.print(f"STATUS {parts}", markup=False, highlight=False)

    @contextmanager
    def step(self, title: str) -> Iterator[None]:
        if self.quiet:
            yield
            return

        start = time.monotonic()
        if self._live_enabled:
            with self.console.status(title):
                yield
            self.console.print(Text("✓ ", style="bold green") + Text(f"{title} ({time.monotonic() - start:.2f}s)"))
            return

        self.console.print(Text("==> ", style="bold cyan") + Text(title))
        try:
            yield
        finally:
            self.console.print(
                Text("<== ", style="bold cyan") + Text(f"{title} ({time.monotonic() - start:.2f}s)")
            )
