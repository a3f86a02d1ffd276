"""
Running the experiments from the command line
=============================================

Every experiment reads an INI file and writes CSV artefacts, a key=value
``summary.txt`` and a ``manifest.json`` into its output directory.  This
script drives the same entry point as the ``symbohm`` console command.
"""

import pathlib

from symbohm.cli import main

here = pathlib.Path(__file__).parent
configs = here / "configs"

runs = [
    ["characters", "--n", "5", "--out", "runs/characters"],
    ["lift-independence", "--config", str(configs / "fermion_pair_1d.ini"), "--out", "runs/lift"],
    ["non-crossing-1d", "--config", str(configs / "fermion_pair_1d.ini"), "--out", "runs/non-crossing"],
    ["mass-density", "--config", str(configs / "fermion_pair_1d.ini"), "--out", "runs/mass"],
]
for argv in runs:
    code = main(argv)
    print(f"$ symbohm {' '.join(argv)}  -> exit {code}")
    print(pathlib.Path(argv[-1], "summary.txt").read_text())

# A config with a missing field is rejected with the offending line.
bad = pathlib.Path("runs/bad.ini")
bad.parent.mkdir(exist_ok=True)
bad.write_text("[wavefunction]\nstatistics = fermion\n[packet.0]\ncenter = 0\nmomentum = 0\n")
print("exit", main(["periodicity", "--config", str(bad)]))
