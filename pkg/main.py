import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "python-scripts"))

from cli import main as cli_main  # noqa: E402


def main() -> int:
    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
