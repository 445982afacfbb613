"""Make pressbench executable as a module."""
from pressbench.cli import main

if __name__ == '__main__':
    main()
