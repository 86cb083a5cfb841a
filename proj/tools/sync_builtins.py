#!/usr/bin/env python3
"""Copy configs/<name>.ini into the raw strings of include/conelab/builtins.hpp."""
import pathlib
import re
import sys

root = pathlib.Path(__file__).resolve().parent.parent
header = root / "include" / "conelab" / "builtins.hpp"
text = header.read_text()


def replace(match):
    name = match.group(1)
    ini = (root / "configs" / f"{name}.ini").read_text()
    return f'{{"{name}", R"ini({ini})ini"}}'


new = re.sub(r'\{"(\w+)", R"ini\(.*?\)ini"\}', replace, text, flags=re.S)
if "--check" in sys.argv:
    sys.exit(0 if new == text else 1)
header.write_text(new)
