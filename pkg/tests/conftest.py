import sys
from pathlib import Path

# let the suite run from a fresh checkout without an editable install
SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
