from __future__ import annotations

from .cli import app


def main() -> None:
    """
    Console entrypoint for `bestchoice`.

    All CLI definitions live in `bestchoice.cli`.
    """
    app(prog_name="bestchoice")


if __name__ == "__main__":
    main()
