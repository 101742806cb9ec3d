"""Main entry point for ehmm."""

from ehmm.cli.main import main

if __name__ == "__main__":
    main()
