"""python -m hexloop"""
from hexloop.cli import main

if __name__ == "__main__":
    main()
