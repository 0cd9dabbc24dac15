"""Entry point for idg-lab when run as a module."""

from idg_lab.cli import main

if __name__ == "__main__":
    main()
