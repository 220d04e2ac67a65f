"""
Robust min-max toolkit

    python robust-minmax.py run scenarios/cones-1d.yaml --out reports
    python robust-minmax.py generate --seed 1 --template cones-1d --out scenarios/seed1.yaml
"""
from modules.cli import main

if __name__ == "__main__":
    main()
