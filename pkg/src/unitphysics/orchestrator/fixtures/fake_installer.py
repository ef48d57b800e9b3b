"""Offline stand-in for a package installer.

Usage: fake_installer.py SITE PACKAGE. Copies PACKAGE from the packages/
directory next to this file into SITE, or exits 1 when it is unknown.
"""

import shutil
import sys
from pathlib import Path

site, package = Path(sys.argv[1]), sys.argv[2]
source = Path(__file__).with_name("packages") / package
if not source.is_dir():
    print(f"ERROR: no matching distribution found for {package}", file=sys.stderr)
    sys.exit(1)
shutil.copytree(source, site / package)
print(f"Successfully installed {package}")
